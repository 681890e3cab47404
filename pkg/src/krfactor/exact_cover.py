"""Exact cover via dancing links (Algorithm X).

Columns are integers 0..n_cols-1; rows are added as iterables of column ids
and identified by an opaque row id. The search branches on a column with the
fewest remaining rows (leftmost breaks ties) and tries rows in insertion
order, so the solution stream is deterministic.
"""

from __future__ import annotations


class _Node:
    __slots__ = ("left", "right", "up", "down", "col", "row_id")


class _Column(_Node):
    __slots__ = ("size", "id")


class ExactCover:
    def __init__(self, n_cols: int):
        if n_cols < 0:
            raise ValueError("n_cols must be nonnegative")
        root = _Column()
        root.left = root.right = root.up = root.down = root
        root.size = 0
        root.id = -1
        self.root = root
        self.cols = []
        prev = root
        for c in range(n_cols):
            col = _Column()
            col.id = c
            col.size = 0
            col.up = col.down = col
            col.left = prev
            col.right = root
            prev.right = col
            root.left = col
            self.cols.append(col)
            prev = col
        self.row_count = 0

    def add_row(self, row_id, col_ids) -> None:
        first = None
        for c in col_ids:
            col = self.cols[c]
            node = _Node()
            node.col = col
            node.row_id = row_id
            node.down = col
            node.up = col.up
            col.up.down = node
            col.up = node
            col.size += 1
            if first is None:
                first = node
                node.left = node.right = node
            else:
                node.left = first.left
                node.right = first
                first.left.right = node
                first.left = node
        if first is None:
            raise ValueError("rows must touch at least one column")
        self.row_count += 1

    @staticmethod
    def _cover(col):
        col.right.left = col.left
        col.left.right = col.right
        i = col.down
        while i is not col:
            j = i.right
            while j is not i:
                j.down.up = j.up
                j.up.down = j.down
                j.col.size -= 1
                j = j.right
            i = i.down

    @staticmethod
    def _uncover(col):
        i = col.up
        while i is not col:
            j = i.left
            while j is not i:
                j.col.size += 1
                j.down.up = j
                j.up.down = j
                j = j.left
            i = i.up
        col.right.left = col
        col.left.right = col

    def solutions(self):
        """Yield every exact cover as a tuple of row ids."""
        root = self.root
        stack: list = []

        def search():
            if root.right is root:
                yield tuple(stack)
                return
            best = None
            c = root.right
            while c is not root:
                if best is None or c.size < best.size:
                    best = c
                    if best.size == 0:
                        return
                c = c.right
            self._cover(best)
            i = best.down
            while i is not best:
                stack.append(i.row_id)
                j = i.right
                while j is not i:
                    self._cover(j.col)
                    j = j.right
                yield from search()
                j = i.left
                while j is not i:
                    self._uncover(j.col)
                    j = j.left
                stack.pop()
                i = i.down
            self._uncover(best)

        yield from search()

    def first_solution(self):
        for sol in self.solutions():
            return sol
        return None

    def count_solutions(self, limit: int | None = None) -> int:
        count = 0
        for _ in self.solutions():
            count += 1
            if limit is not None and count >= limit:
                break
        return count
