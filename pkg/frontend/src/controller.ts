/** Glue between the pure reducer and the API client. Requests carry sequence
 * numbers; a response whose sequence was superseded is dispatched anyway and
 * discarded by the reducer, so the event log stays replayable. */

import { PmuseClient, ApiError } from "./api.js";
import { canRequestCompletion, canRequestGeneration, initialState, reduce } from "./state.js";
import { StudioEvent, StudioState } from "./types.js";

export class StudioController {
  state: StudioState = initialState();
  readonly log: StudioEvent[] = [];

  constructor(
    private readonly client: PmuseClient,
    private readonly onChange: (state: StudioState) => void = () => {},
  ) {}

  dispatch(event: StudioEvent): void {
    this.state = reduce(this.state, event);
    this.log.push(event);
    this.onChange(this.state);
  }

  async requestCompletion(): Promise<void> {
    if (!canRequestCompletion(this.state)) return;
    const seq = this.state.seqCounter + 1;
    const core = this.state.core;
    this.dispatch({ type: "completion-started", seq });
    try {
      const recommendations = await this.client.recommend(core);
      this.dispatch({ type: "completion-received", seq, recommendations });
    } catch (err) {
      this.dispatch({ type: "completion-failed", seq, message: messageOf(err) });
    }
  }

  async requestGeneration(): Promise<void> {
    if (!canRequestGeneration(this.state)) return;
    const seq = this.state.seqCounter + 1;
    const { phrases, postProcess } = this.state.core;
    this.dispatch({ type: "generation-started", seq });
    try {
      const colors = await this.client.generate(phrases, postProcess);
      this.dispatch({ type: "generation-received", seq, colors });
    } catch (err) {
      this.dispatch({ type: "generation-failed", seq, message: messageOf(err) });
    }
  }
}

function messageOf(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  return String(err);
}
