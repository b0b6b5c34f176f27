"""Exception types shared across the simulator."""


class TeamSimError(Exception):
    """Base class for all simulator errors."""


# --- environment ---

class DimensionTooSmall(TeamSimError):
    pass


class EntityOutOfBounds(TeamSimError):
    pass


class UnplaceableEntity(TeamSimError):
    pass


class OccupantOnBlockedCell(TeamSimError):
    pass


class OutOfBounds(TeamSimError):
    pass


class NoPath(TeamSimError):
    pass


class BlockedEndpoint(TeamSimError):
    pass


class UnknownRegion(TeamSimError):
    pass


# --- scheduler ---

class PastTimestep(TeamSimError):
    pass


class UnknownHandler(TeamSimError):
    pass


# --- agents / conversations ---

class UnknownAgent(TeamSimError):
    pass


class UnparsableResponse(TeamSimError):
    pass


class EmptyInvitees(TeamSimError):
    pass


class ClosedConversation(TeamSimError):
    pass


class NonParticipant(TeamSimError):
    pass


# --- gateway ---

class GatewayUnavailable(TeamSimError):
    pass


class GatewayTimeout(TeamSimError):
    pass


class RateLimited(TeamSimError):
    def __init__(self, message: str = "rate limited", retry_after: float = 1.0):
        super().__init__(message)
        self.retry_after = retry_after


class MissingBinding(TeamSimError):
    pass


class EmbedderUnavailable(TeamSimError):
    pass


# --- store ---

class SchemaVersionUnsupported(TeamSimError):
    pass


class MalformedDocument(TeamSimError):
    pass


class UnknownRun(TeamSimError):
    pass


class CorruptSnapshot(TeamSimError):
    pass


class RunNotFinished(TeamSimError):
    pass


# --- engine ---

class InvalidScenario(TeamSimError):
    pass


class AbortedByUser(TeamSimError):
    pass
