# Runs one generated component class behind a JSON-lines pipe.
# argv: <source file> <class name>. Each request line is a JSON object of
# keyword arguments; each reply is {"ok": {...}} or {"error": "..."}.
import json
import math
import sys

out = sys.stdout
sys.stdout = sys.stderr


def reply(obj):
    out.write(json.dumps(obj) + "\n")
    out.flush()


def decode(v):
    return float(v) if isinstance(v, str) else v


def encode(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError("output value %r is not a number" % (v,))
    v = float(v)
    return v if math.isfinite(v) else repr(v)


try:
    namespace = {"__name__": "generated_component"}
    with open(sys.argv[1]) as f:
        exec(compile(f.read(), sys.argv[1], "exec"), namespace)
    instance = namespace[sys.argv[2]]()
except Exception as e:
    reply({"error": "%s: %s" % (type(e).__name__, e)})
    sys.exit(1)
reply({"ready": True})

for line in sys.stdin:
    try:
        kwargs = {k: decode(v) for k, v in json.loads(line).items()}
        result = instance.execute(**kwargs)
        if not isinstance(result, dict):
            raise TypeError("execute returned %s, not a dict" % type(result).__name__)
        reply({"ok": {str(k): encode(v) for k, v in result.items()}})
    except Exception as e:
        reply({"error": "%s: %s" % (type(e).__name__, e)})
