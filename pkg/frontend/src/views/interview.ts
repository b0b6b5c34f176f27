/** Post-run interview chat: guided 24-item walk or free-form questions. */

import type { AppContext } from '../context.js';
import { el } from '../context.js';
import type { InterviewReply } from '../types.js';

export function renderInterviewView(ctx: AppContext, root: HTMLElement): void {
  root.replaceChildren();
  const panel = el('div', 'panel');
  panel.appendChild(el('h2', '', 'Interview'));

  const agentSelect = el('select') as HTMLSelectElement;
  for (const agent of ctx.store.view?.agents ?? []) {
    const option = el('option', '', `${agent.name} (${agent.role})`) as HTMLOptionElement;
    option.value = String(agent.id);
    agentSelect.appendChild(option);
  }
  const modeSelect = el('select') as HTMLSelectElement;
  for (const mode of ['guided', 'custom']) {
    const option = el('option', '', mode) as HTMLOptionElement;
    option.value = mode;
    modeSelect.appendChild(option);
  }
  const start = el('button', 'primary', 'Start Interview');
  const row = el('div', 'row');
  row.append(agentSelect, modeSelect, start);
  panel.appendChild(row);

  const chat = el('div', 'chat');
  panel.appendChild(chat);

  const nextButton = el('button', '', 'Next Question');
  nextButton.disabled = true;
  const questionInput = el('input') as HTMLInputElement;
  questionInput.placeholder = 'Ask your own question...';
  const askButton = el('button', '', 'Ask');
  askButton.disabled = true;
  const controls = el('div', 'row');
  controls.append(nextButton, questionInput, askButton);
  panel.appendChild(controls);

  const bubble = (reply: InterviewReply, question: string) => {
    chat.appendChild(el('div', 'bubble question', question));
    const answer = el('div', 'bubble answer');
    if (reply.rating !== null && reply.rating !== undefined) {
      answer.appendChild(el('span', 'rating-chip', `${reply.rating}/10`));
    }
    answer.appendChild(el('span', '', reply.explanation));
    chat.appendChild(answer);
    chat.scrollTop = chat.scrollHeight;
  };

  start.addEventListener('click', async () => {
    if (!ctx.runId) return;
    const mode = modeSelect.value as 'guided' | 'custom';
    const session = await ctx.api.startInterview(
      ctx.runId, Number(agentSelect.value), mode);
    ctx.interviewId = session.id;
    chat.replaceChildren();
    if (session.first_question) {
      chat.appendChild(el('div', 'bubble question',
        `Up next: ${session.first_question}`));
    }
    nextButton.disabled = mode !== 'guided';
    askButton.disabled = false;
  });

  nextButton.addEventListener('click', async () => {
    if (!ctx.interviewId) return;
    nextButton.disabled = true;
    try {
      const reply = await ctx.api.askNext(ctx.interviewId);
      bubble(reply, `Item ${reply.item}: ${reply.question ?? ''}`);
    } finally {
      nextButton.disabled = false;
    }
  });

  askButton.addEventListener('click', async () => {
    if (!ctx.interviewId || !questionInput.value.trim()) return;
    const question = questionInput.value.trim();
    questionInput.value = '';
    const reply = await ctx.api.ask(ctx.interviewId, question);
    bubble(reply, question);
  });

  root.appendChild(panel);
}
