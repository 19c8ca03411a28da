/**
 * Loss-driven learning-rate callback.
 *
 * The callback never touches model objects. It watches one number per
 * block, the full-training-set loss, and answers with directives the host
 * applies: set the rate (and zero any momentum buffers), train, save or
 * restore the single checkpoint slot, reload the initial weights, or stop.
 * Checkpointing stays host-side by design; the callback only signals.
 *
 * Protocol: construct with the untrained model's loss, apply
 * `initialDirectives`, train, then feed each observed loss to `observe`
 * and apply what comes back, until a `stop` directive arrives.
 *
 * One instance drives one training run; instances are not shareable
 * across concurrent runs.
 */

export type Directive =
  | { type: "set_lr"; lr: number }
  | { type: "save_checkpoint" }
  | { type: "restore_checkpoint" }
  | { type: "reinitialize_model" }
  | { type: "train_epochs"; count: number }
  | { type: "stop" };

export type BlockFlavor = "p" | "p1";

/** Consecutive non-worsening epochs required to leave the exploration phase. */
export const INITIAL_PATIENCE = 10;

export class AalrCallback {
  /** Directives that start the run: set the initial rate, train one epoch. */
  readonly initialDirectives: Directive[];

  private phase: "initial" | "binary" = "initial";
  private lr: number;
  private patience = INITIAL_PATIENCE;
  private streak = 0;
  private bestLoss: number;
  private epoch = 0;
  private pendingEpochs = 1;
  private secondTryPending = false;
  private isStopped = false;
  private readonly epochBudget: number;
  private readonly block: BlockFlavor;

  constructor(
    initialLr: number,
    epochs: number,
    initialLoss: number,
    block: BlockFlavor = "p",
  ) {
    if (!Number.isFinite(initialLr) || initialLr <= 0) {
      throw new RangeError(`initialLr must be positive and finite, got ${initialLr}`);
    }
    if (!Number.isInteger(epochs) || epochs < 1) {
      throw new RangeError(`epochs must be a positive integer, got ${epochs}`);
    }
    if (block !== "p" && block !== "p1") {
      throw new RangeError(`block must be "p" or "p1", got ${block}`);
    }
    if (!Number.isFinite(initialLoss)) {
      throw new RangeError(`initial loss is non-finite (${initialLoss}); refusing to start`);
    }
    this.lr = initialLr;
    this.epochBudget = epochs;
    this.bestLoss = initialLoss;
    this.block = block;
    this.initialDirectives = [
      { type: "set_lr", lr: initialLr },
      { type: "train_epochs", count: 1 },
    ];
  }

  get stopped(): boolean {
    return this.isStopped;
  }

  get currentLr(): number {
    return this.lr;
  }

  get epochsTrained(): number {
    return this.epoch;
  }

  /** Feed the loss observed after the last trained block. */
  observe(loss: number): Directive[] {
    if (this.isStopped) {
      throw new Error("observation arrived after stop");
    }
    this.epoch += this.pendingEpochs;
    return this.phase === "initial" ? this.observeInitial(loss) : this.observeBinary(loss);
  }

  private observeInitial(loss: number): Directive[] {
    if (Number.isFinite(loss) && loss <= this.bestLoss) {
      this.bestLoss = loss;
      this.streak += 1;
      if (this.streak >= this.patience) {
        // stable rate found: checkpoint it, then explore upward doubled
        this.phase = "binary";
        this.lr *= 2;
        this.patience = 1;
        this.streak = 0;
        this.secondTryPending = false;
        return this.emit(
          [{ type: "save_checkpoint" }, { type: "set_lr", lr: this.lr }],
          this.blockLength(),
        );
      }
      return this.emit([], 1);
    }
    // worse or non-finite: halve and start over; the best loss is kept
    this.lr /= 2;
    this.streak = 0;
    return this.emit(
      [{ type: "reinitialize_model" }, { type: "set_lr", lr: this.lr }],
      1,
    );
  }

  private observeBinary(loss: number): Directive[] {
    if (!Number.isFinite(loss)) {
      this.lr /= 2;
      this.patience *= 2;
      this.secondTryPending = false;
      return this.emit(
        [{ type: "restore_checkpoint" }, { type: "set_lr", lr: this.lr }],
        this.blockLength(),
      );
    }
    if (loss < this.bestLoss) {
      this.bestLoss = loss;
      this.lr *= 2;
      this.patience = 1;
      this.secondTryPending = false;
      return this.emit(
        [{ type: "save_checkpoint" }, { type: "set_lr", lr: this.lr }],
        this.blockLength(),
      );
    }
    if (!this.secondTryPending) {
      // optimistic retry: the same rate gets one more block
      this.secondTryPending = true;
      return this.emit([], this.blockLength());
    }
    this.lr /= 2;
    this.patience *= 2;
    this.secondTryPending = false;
    return this.emit([{ type: "set_lr", lr: this.lr }], this.blockLength());
  }

  private blockLength(): number {
    return this.block === "p1" ? this.patience + 1 : this.patience;
  }

  /** Blocks never overrun the budget: truncate, or stop once it is spent. */
  private emit(prefix: Directive[], blockLength: number): Directive[] {
    if (this.epoch >= this.epochBudget) {
      this.pendingEpochs = 0;
      this.isStopped = true;
      return [...prefix, { type: "stop" }];
    }
    const count = Math.min(blockLength, this.epochBudget - this.epoch);
    this.pendingEpochs = count;
    return [...prefix, { type: "train_epochs", count }];
  }
}

export default AalrCallback;
