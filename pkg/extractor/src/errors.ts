export class ExtractorError extends Error {
  readonly exitCode: number = 1;
}

/** The input is missing, not RIFF/AVI, or not uncompressed BGR24. */
export class UnreadableVideo extends ExtractorError {
  override readonly exitCode = 3;
}

/** Unknown encoder or motion method name. */
export class EncoderLoadFailure extends ExtractorError {
  override readonly exitCode = 2;
}

export class UsageError extends ExtractorError {
  override readonly exitCode = 2;
}
