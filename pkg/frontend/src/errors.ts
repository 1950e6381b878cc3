/**
 * Failures surface as ordinary Error objects whose `name` is the core
 * error class ("BudgetTooLarge", "ZeroNormVector", ...), parsed from
 * the CLI's `error: ClassName: message` stderr line. `exitCode` keeps
 * the process status: 1 usage, 2 data, 3 resource limits.
 */
export class DivPruneError extends Error {
  readonly coreClass: string;
  readonly exitCode: number;

  constructor(coreClass: string, message: string, exitCode: number) {
    super(message);
    this.name = coreClass;
    this.coreClass = coreClass;
    this.exitCode = exitCode;
  }
}

const STDERR_LINE = /^error:\s*([A-Za-z_][A-Za-z0-9_]*):\s*(.*)$/;

export function errorFromStderr(stderr: string, status: number): DivPruneError {
  const line = stderr
    .split("\n")
    .reverse()
    .find((l) => STDERR_LINE.test(l.trim()));
  if (line) {
    const m = STDERR_LINE.exec(line.trim())!;
    return new DivPruneError(m[1], m[2], status);
  }
  return new DivPruneError("UnknownError", stderr.trim() || `exit ${status}`, status);
}
