"""Scripted trainer backend for protocol tests.

usage: stub_trainer.py MODE [ARG]

echo      reply val_accuracy 0.5, val_loss 0.6931; wall_seconds echoes the
          epochs and param_count the number of layers received
reverse   declare max_parallelism 2, read two requests, answer in reverse
error     answer every request with ok:false
die       read one request, complain on stderr, exit 1
hang      read requests and never answer
nohello   exit before the handshake
flaky F   exit before the handshake unless file F exists (creating it), then echo
"""

import json
import os
import sys
import time


def send(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def echo(req):
    return {
        "id": req["id"],
        "ok": True,
        "val_accuracy": 0.5,
        "val_loss": 0.6931,
        "wall_seconds": float(req["epochs"]),
        "param_count": len(req["architecture"]["layers"]),
    }


def requests():
    for line in sys.stdin:
        if line.strip():
            yield json.loads(line)


def main():
    mode = sys.argv[1]
    if mode == "nohello":
        sys.stderr.write("backend: cannot load dataset\n")
        sys.exit(3)
    if mode == "flaky":
        marker = sys.argv[2]
        if not os.path.exists(marker):
            open(marker, "w").close()
            sys.stderr.write("backend: first start fails\n")
            sys.exit(1)
        mode = "echo"

    parallel = 2 if mode == "reverse" else 1
    send({"op": "hello", "max_parallelism": parallel, "validation_split": "last 10%"})

    if mode == "echo":
        for req in requests():
            send(echo(req))
    elif mode == "reverse":
        batch = []
        for req in requests():
            batch.append(req)
            if len(batch) == 2:
                for r in reversed(batch):
                    send(echo(r))
                batch = []
    elif mode == "error":
        for req in requests():
            send({"id": req["id"], "ok": False, "error": "out of memory"})
    elif mode == "die":
        for _ in requests():
            sys.stderr.write("backend: CUDA error: device lost\n")
            sys.stderr.flush()
            sys.exit(1)
    elif mode == "hang":
        for _ in requests():
            time.sleep(3600)


if __name__ == "__main__":
    main()
