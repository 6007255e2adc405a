import { parseArgs } from "node:util";

import { DEFAULTS, extract } from "./extract.js";
import { ExtractorError, UsageError } from "./errors.js";

const USAGE = `usage: evseg-extract extract --video FILE.avi [--fps N] [--encoder NAME]
                             [--motion METHOD] --out FILE.evst [--format FMT]

Converts a video into an engine-ready feature stream.

  --video    input video (uncompressed BGR24 AVI)
  --fps      sample rate, default ${DEFAULTS.fps}
  --encoder  embedding, default ${DEFAULTS.encoder} (also: gray16)
  --motion   frame_diff (default) or optical_flow
  --out      output stream file
  --format   binary or jsonl, default by extension
`;

export function main(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    if (command === "--help" || command === "-h") {
      process.stdout.write(USAGE);
      return 0;
    }
    if (command !== "extract") {
      throw new UsageError(command ? `unknown command "${command}"` : "missing command");
    }
    const { values } = parseArgs({
      args: rest,
      options: {
        video: { type: "string" },
        fps: { type: "string" },
        encoder: { type: "string", default: DEFAULTS.encoder },
        motion: { type: "string", default: DEFAULTS.motion },
        out: { type: "string" },
        format: { type: "string" },
        help: { type: "boolean", short: "h" },
      },
    });
    if (values.help) {
      process.stdout.write(USAGE);
      return 0;
    }
    if (!values.video || !values.out) throw new UsageError("--video and --out are required");
    const fps = values.fps === undefined ? DEFAULTS.fps : Number(values.fps);
    if (!Number.isFinite(fps)) throw new UsageError(`bad --fps value "${values.fps}"`);

    const { records, dim } = extract({
      video: values.video,
      fps,
      encoder: values.encoder,
      motion: values.motion,
      out: values.out,
      format: values.format,
    });
    process.stderr.write(`wrote ${records} records (d=${dim}) to ${values.out}\n`);
    return 0;
  } catch (err) {
    if (err instanceof ExtractorError) {
      process.stderr.write(`error: ${err.message}\n`);
      if (err instanceof UsageError) process.stderr.write(USAGE);
      return err.exitCode;
    }
    if (err instanceof Error && err.message.includes("Unknown option")) {
      process.stderr.write(`error: ${err.message}\n${USAGE}`);
      return 2;
    }
    throw err;
  }
}
