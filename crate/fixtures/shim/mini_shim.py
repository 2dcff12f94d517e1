"""Small stand-in for the runtime helper, speaking the same CLI contract.

Used by the integration tests. Each repetition runs in a fresh interpreter;
coverage comes from sys.settrace instead of a coverage package.
"""
import argparse
import contextlib
import dis
import importlib
import io
import json
import os
import pickle
import subprocess
import sys
import time
import traceback
import types


def import_name(path):
    parts = os.path.splitext(path)[0].split(os.sep)
    if parts[-1] == "__init__":
        parts.pop()
    return ".".join(parts)


def executable_lines(path):
    with open(path) as f:
        code = compile(f.read(), path, "exec")
    lines = set()
    stack = [code]
    while stack:
        c = stack.pop()
        lines.update(l for _, l in dis.findlinestarts(c) if l)
        stack.extend(k for k in c.co_consts if isinstance(k, types.CodeType))
    return sorted(lines)


def run_once(args):
    sys.path.insert(0, os.getcwd())
    target = os.path.abspath(args.module)
    covered = set()

    def tracer(frame, event, arg):
        if frame.f_code.co_filename == target:
            covered.add(frame.f_lineno)
        return tracer

    out, err = io.StringIO(), io.StringIO()
    result = {"status": "pass", "exception_type": None}
    start = time.time()
    if args.coverage_out:
        sys.settrace(tracer)
    try:
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            mod = importlib.import_module(import_name(args.test_file))
            for name in sorted(n for n in dir(mod) if n.startswith("test_")):
                getattr(mod, name)()
    except AssertionError:
        result = {"status": "assertion_error", "exception_type": "AssertionError"}
        err.write(traceback.format_exc())
    except BaseException as e:
        result = {"status": "other_error", "exception_type": type(e).__name__}
        err.write(traceback.format_exc())
    finally:
        sys.settrace(None)
    result.update(stdout=out.getvalue(), stderr=err.getvalue(), wall_time=time.time() - start)
    if args.coverage_out:
        with open(args.coverage_out, "w") as f:
            json.dump({"file": args.module, "executable_lines": executable_lines(target),
                       "covered_lines": sorted(covered)}, f)
    print(json.dumps(result))


def run_test(args):
    results = []
    for i in range(args.repeat):
        cmd = [sys.executable, __file__, "_once", "--module", args.module, "--test-file", args.test_file]
        if args.coverage_out and i == args.repeat - 1:
            cmd += ["--coverage-out", args.coverage_out]
        start = time.time()
        try:
            p = subprocess.run(cmd, capture_output=True, text=True, timeout=args.timeout)
            results.append(json.loads(p.stdout.strip().splitlines()[-1]))
        except subprocess.TimeoutExpired:
            results.append({"status": "timeout", "exception_type": None, "stdout": "", "stderr": "",
                            "wall_time": time.time() - start})
    print(json.dumps(results))


def literal(value):
    if isinstance(value, (int, float, str, bytes, bool, type(None), list, tuple, dict, set)):
        text = repr(value)
        try:
            if eval(text) == value:
                return text
        except Exception:
            pass
    return None


def capture_call(args):
    sys.path.insert(0, os.getcwd())
    start = time.time()
    out = io.StringIO()
    try:
        with contextlib.redirect_stdout(out):
            mod = importlib.import_module(import_name(args.module))
            value = eval(args.call, vars(mod).copy())
        with open(args.blob_out, "wb") as f:
            pickle.dump(value, f)
        result = {"status": "pass", "exception_type": None, "literal": literal(value),
                  "value_blob": args.blob_out}
    except BaseException as e:
        result = {"status": "other_error", "exception_type": type(e).__name__, "literal": None,
                  "value_blob": None}
    result.update(stdout=out.getvalue(), stderr="", wall_time=time.time() - start)
    print(json.dumps(result))


def main():
    p = argparse.ArgumentParser()
    sub = p.add_subparsers(dest="cmd", required=True)
    for name in ("run-test", "_once"):
        s = sub.add_parser(name)
        s.add_argument("--module", required=True)
        s.add_argument("--test-file", required=True)
        s.add_argument("--repeat", type=int, default=1)
        s.add_argument("--timeout", type=float, default=30)
        s.add_argument("--coverage-out")
    c = sub.add_parser("capture-call")
    c.add_argument("--module", required=True)
    c.add_argument("--call", required=True)
    c.add_argument("--blob-out", required=True)
    c.add_argument("--timeout", type=float, default=30)
    args = p.parse_args()
    {"run-test": run_test, "_once": run_once, "capture-call": capture_call}[args.cmd](args)


if __name__ == "__main__":
    main()
