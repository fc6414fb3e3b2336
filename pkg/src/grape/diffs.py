"""Unified-diff parsing and per-file changed-line bookkeeping."""

import re
from dataclasses import dataclass, field


class DiffParseError(Exception):
    pass


@dataclass
class FileChange:
    path: str
    removed_lines: set[int] = field(default_factory=set)  # 1-based, buggy file
    added_lines: set[int] = field(default_factory=set)  # 1-based, fixed file


@dataclass
class PatchDiff:
    files: list[FileChange] = field(default_factory=list)

    def file(self, path: str) -> FileChange:
        for fc in self.files:
            if fc.path == path:
                return fc
        raise KeyError(f"path not present in diff: {path!r}")


_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


def _strip_prefix(path: str) -> str:
    # Drop the conventional a/ b/ prefixes and any timestamp suffix.
    path = path.split("\t")[0].strip()
    if path.startswith(("a/", "b/")):
        path = path[2:]
    return path


def parse_unified_diff(text: str) -> PatchDiff:
    """Parse unified-diff text into per-file removed/added line-number sets.

    Line numbers are computed from the hunk headers: context lines advance
    both counters, ``-`` lines advance only the pre counter, ``+`` lines only
    the post counter.
    """
    if not text.strip():
        raise DiffParseError("empty diff")
    diff = PatchDiff()
    current: FileChange | None = None
    old_line = new_line = 0
    old_left = new_left = 0
    in_hunk = False
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i]
        if line.startswith("--- "):
            if i + 1 >= len(lines) or not lines[i + 1].startswith("+++ "):
                raise DiffParseError(f"'---' header without '+++' pair at line {i + 1}")
            new_path = _strip_prefix(lines[i + 1][4:])
            old_path = _strip_prefix(line[4:])
            path = new_path if new_path != "/dev/null" else old_path
            if any(fc.path == path for fc in diff.files):
                raise DiffParseError(f"duplicate file entry {path!r} at line {i + 1}")
            current = FileChange(path)
            diff.files.append(current)
            in_hunk = False
            i += 2
            continue
        m = _HUNK_RE.match(line)
        if m:
            if current is None:
                raise DiffParseError(f"hunk header before any file header at line {i + 1}")
            old_line = int(m.group(1))
            old_left = int(m.group(2)) if m.group(2) is not None else 1
            new_line = int(m.group(3))
            new_left = int(m.group(4)) if m.group(4) is not None else 1
            in_hunk = True
            i += 1
            continue
        if line.startswith("@@"):
            raise DiffParseError(f"malformed hunk header at line {i + 1}: {line!r}")
        if in_hunk and current is not None and (old_left > 0 or new_left > 0):
            if line.startswith("-"):
                if old_left <= 0:
                    raise DiffParseError(f"hunk overruns its pre-image length at line {i + 1}")
                current.removed_lines.add(old_line)
                old_line += 1
                old_left -= 1
            elif line.startswith("+"):
                if new_left <= 0:
                    raise DiffParseError(f"hunk overruns its post-image length at line {i + 1}")
                current.added_lines.add(new_line)
                new_line += 1
                new_left -= 1
            elif line.startswith(" ") or line == "":
                if old_left <= 0 or new_left <= 0:
                    raise DiffParseError(f"hunk overruns its declared length at line {i + 1}")
                old_line += 1
                new_line += 1
                old_left -= 1
                new_left -= 1
            elif line.startswith("\\"):
                pass  # "\ No newline at end of file"
            else:
                raise DiffParseError(f"unexpected line inside hunk at line {i + 1}: {line!r}")
            i += 1
            continue
        # Anything else (git headers, index lines, prose) is ignored.
        in_hunk = False
        i += 1
    if not diff.files:
        raise DiffParseError("no file headers found in diff")
    return diff


def changed_lines(diff: PatchDiff, path: str) -> tuple[set[int], set[int]]:
    """Return (removed, added) line sets for one file of the diff."""
    fc = diff.file(path)
    return set(fc.removed_lines), set(fc.added_lines)
