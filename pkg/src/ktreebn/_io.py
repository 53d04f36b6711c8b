"""Accept either a path or an open text stream in writers."""

import contextlib


@contextlib.contextmanager
def open_text(target):
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", encoding="utf-8") as fh:
            yield fh
