"""Level-structured succinct store for partial embeddings.

Level l keeps one id per embedding of size l (its last element) in
``vert`` plus an ``off`` array mapping each parent embedding at level
l-1 to the slice of its children, so a full embedding is recovered by
walking offsets upward instead of storing k ids per embedding. Level 1
may be the identity over the seed set, in which case ``vert`` is not
materialized.
"""

import numpy as np


class InvariantError(ValueError):
    """A level array violates the store's structural invariants."""


class Level:
    __slots__ = ("index", "vert", "off", "pred", "residency", "parts",
                 "vert_count", "id_width")

    def __init__(self, index, vert, off, pred=None, id_width=4):
        self.index = index          # 1-based size of embeddings here
        self.vert = vert            # last-id array, or None for identity
        self.off = off              # int64 child-slice boundaries, or None if spilled
        self.pred = pred            # predicted candidate count per embedding
        self.residency = "mem"
        self.parts = None           # spill part metadata once written out
        self.id_width = id_width
        self.vert_count = int(off[-1]) if off is not None else 0

    @property
    def count(self):
        return self.vert_count

    @property
    def identity(self):
        return self.vert is None and self.residency == "mem"

    def value(self, i):
        return int(i) if self.vert is None else int(self.vert[i])

    def size_bytes(self):
        """Exact payload footprint of vert plus off.

        Offsets are 64-bit regardless of id width, so a level of v vert
        entries and o off entries occupies v * id_width + o * 8 bytes;
        an identity level contributes only its off bytes.
        """
        vb = 0 if self.vert is None else self.vert_count * self.id_width
        ob = 0 if self.off is None else len(self.off) * 8
        return vb + ob


class EmbeddingStore:
    """Ordered stack of levels for one exploration run.

    mode is 'vertex' (ids are vertex ids) or 'edge' (ids are edge ids);
    the store itself only checks structure, not graph membership.
    """

    def __init__(self, mode="vertex", id_dtype=np.int32):
        if mode not in ("vertex", "edge"):
            raise ValueError("mode must be 'vertex' or 'edge'")
        self.mode = mode
        self.id_dtype = np.dtype(id_dtype)
        self.levels = []

    @property
    def depth(self):
        return len(self.levels)

    @property
    def top(self):
        return self.levels[-1]

    def level(self, index):
        return self.levels[index - 1]

    def seed_identity(self, n, pred=None):
        """Level 1 over seeds 0..n-1 without materializing vert."""
        if self.levels:
            raise InvariantError("store already seeded")
        off = np.array([0, n], dtype=np.int64)
        lvl = Level(1, None, off, pred, self.id_dtype.itemsize)
        self.levels.append(lvl)
        return lvl

    def seed_level1(self, ids, pred=None):
        """Level 1 over an explicit (filtered) ascending seed array."""
        if self.levels:
            raise InvariantError("store already seeded")
        ids = np.asarray(ids, dtype=self.id_dtype)
        if len(ids) > 1 and not (np.diff(ids) > 0).all():
            raise InvariantError("level 1 seeds must be strictly ascending")
        off = np.array([0, len(ids)], dtype=np.int64)
        lvl = Level(1, ids, off, pred, self.id_dtype.itemsize)
        self.levels.append(lvl)
        return lvl

    def append_level(self, vert, off, pred=None):
        """Push level depth+1; validates the structural invariants."""
        if not self.levels:
            raise InvariantError("seed level 1 first")
        vert = np.asarray(vert, dtype=self.id_dtype)
        off = np.asarray(off, dtype=np.int64)
        parent_n = self.top.count
        if len(off) != parent_n + 1:
            raise InvariantError("off must have %d entries, got %d"
                                 % (parent_n + 1, len(off)))
        if len(off) and off[0] != 0:
            raise InvariantError("off[0] must be 0")
        if len(off) > 1 and (np.diff(off) < 0).any():
            raise InvariantError("off must be nondecreasing")
        if int(off[-1]) != len(vert):
            raise InvariantError("off[-1]=%d does not match len(vert)=%d"
                                 % (int(off[-1]), len(vert)))
        if len(vert) > 1:
            rising = np.diff(vert) > 0
            starts = np.zeros(len(vert), dtype=bool)
            inner = off[1:-1]
            starts[inner[inner < len(vert)]] = True  # a new slice may restart low
            bad = ~rising & ~starts[1:]
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise InvariantError("slice not strictly ascending at vert[%d]" % (i + 1))
        lvl = Level(self.depth + 1, vert, off, pred, self.id_dtype.itemsize)
        self.levels.append(lvl)
        return lvl

    def append_spilled(self, vert_count, off, pred, parts):
        """Push a level whose vert payload already lives in part files.

        off may be None when the plan dropped offsets from memory; the
        part files carry their own off segments for replay.
        """
        if not self.levels:
            raise InvariantError("seed level 1 first")
        if off is not None:
            off = np.asarray(off, dtype=np.int64)
            if len(off) != self.top.count + 1:
                raise InvariantError("off must have %d entries, got %d"
                                     % (self.top.count + 1, len(off)))
            if int(off[-1]) != vert_count:
                raise InvariantError("off[-1]=%d does not match vert count %d"
                                     % (int(off[-1]), vert_count))
        lvl = Level(self.depth + 1, None, off, pred, self.id_dtype.itemsize)
        lvl.residency = "disk"
        lvl.parts = parts
        lvl.vert_count = int(vert_count)
        self.levels.append(lvl)
        return lvl

    def level_size_bytes(self, index):
        return self.level(index).size_bytes()

    def total_bytes(self):
        return sum(l.size_bytes() for l in self.levels)

    def extract(self, level_index, offset):
        """Recover the full id tuple of one embedding.

        Walks parents by binary search: the parent of offset o at level l
        is the slice whose off interval contains o. All touched levels
        must be memory resident.
        """
        lvl = self.level(level_index)
        if not 0 <= offset < lvl.count:
            raise IndexError("offset %d out of range at level %d" % (offset, level_index))
        out = []
        o = int(offset)
        for li in range(level_index, 0, -1):
            lvl = self.level(li)
            if lvl.residency != "mem" or lvl.off is None:
                raise InvariantError("level %d is not memory resident" % li)
            out.append(lvl.value(o))
            if li > 1:
                o = int(np.searchsorted(lvl.off, o, side="right")) - 1
        out.reverse()
        return tuple(out)


class LevelSlice:
    """A contiguous window of one level, with global offsets preserved.

    vert covers global ids [vbase, vbase+len(vert)); off covers parent
    indices [obase, obase+len(off)-1) with absolute child offsets. A
    full in-memory level is the special case vbase = obase = 0.
    """

    __slots__ = ("vert", "vbase", "off", "obase")

    def __init__(self, vert, off, vbase=0, obase=0):
        self.vert = vert
        self.off = off
        self.vbase = vbase
        self.obase = obase

    @classmethod
    def of(cls, level):
        if level.residency != "mem":
            raise InvariantError("level %d not memory resident" % level.index)
        return cls(level.vert, level.off)

    def value(self, i):
        return int(i) if self.vert is None else int(self.vert[i - self.vbase])

    def parent_of(self, offset):
        i = int(np.searchsorted(self.off, offset, side="right")) - 1
        return i + self.obase

    def slice_end(self, parent):
        return int(self.off[parent - self.obase + 1])


def iter_embeddings(slices, lo, hi):
    """Yield (offset, ids) for top-level offsets in [lo, hi).

    slices[0..L-1] cover levels 1..L and must each contain the offsets
    the walk touches. The ids list is reused between yields; callers
    that keep it must copy. Runs as an odometer: successive offsets
    share their prefix until a parent slice boundary is crossed.
    """
    depth = len(slices)
    if lo >= hi:
        return
    anc = [0] * depth
    emb = [0] * depth
    o = lo
    for li in range(depth - 1, -1, -1):
        anc[li] = o
        emb[li] = slices[li].value(o)
        if li:
            o = slices[li].parent_of(o)
    yield lo, emb
    top = depth - 1
    for o in range(lo + 1, hi):
        anc[top] = o
        emb[top] = slices[top].value(o)
        li = top
        cur = o
        while li > 0:
            p = anc[li - 1]
            if cur < slices[li].slice_end(p):
                break
            while cur >= slices[li].slice_end(p):  # skip childless parents
                p += 1
            anc[li - 1] = p
            emb[li - 1] = slices[li - 1].value(p)
            cur = p
            li -= 1
        yield o, emb
