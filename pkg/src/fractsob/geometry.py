"""Exact level-m graph approximations of post-critically finite self-similar sets.

Coordinates are tuples of :class:`fractions.Fraction`, so vertex identification
across cells is exact equality; no tolerances appear anywhere in this module.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import CapacityError, ParameterError

Point = tuple[Fraction, ...]
Word = tuple[int, ...]

DEFAULT_MAX_VERTICES = 200_000
MAX_VERTICES_ENV = "FRACTSOB_MAX_VERTICES"


@dataclass(frozen=True)
class AffineMap:
    """x -> matrix @ x + offset with rational entries."""

    matrix: tuple[tuple[Fraction, ...], ...]
    offset: tuple[Fraction, ...]

    @classmethod
    def similarity(cls, ratio: Fraction, offset: Sequence[Fraction]) -> "AffineMap":
        n = len(offset)
        matrix = tuple(
            tuple(ratio if i == j else Fraction(0) for j in range(n)) for i in range(n)
        )
        return cls(matrix, tuple(Fraction(c) for c in offset))

    def __call__(self, point: Point) -> Point:
        return tuple(
            sum((a * x for a, x in zip(row, point)), Fraction(0)) + b
            for row, b in zip(self.matrix, self.offset)
        )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(np.array(self.matrix, dtype=float), 2))


@dataclass(frozen=True)
class IfsSpec:
    """An iterated function system together with its renormalization data.

    ``maps[i]`` fixes ``boundary_points[i]`` for the built-in families, so the
    boundary ordering q_0, q_1, ... follows the map ordering.
    """

    name: str
    maps: tuple[AffineMap, ...]
    boundary_points: tuple[Point, ...]
    r: Fraction
    mu: Fraction
    D: float
    gamma: float
    ambient_dim: int
    params: tuple[tuple[str, int], ...] = ()

    @property
    def J(self) -> int:
        return len(self.maps)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_points)

    @property
    def contraction(self) -> float:
        return max(f.norm for f in self.maps)

    @property
    def walk_dim(self) -> float:
        return self.D + 1.0

    def l1_diameter(self) -> Fraction:
        """Largest l1 distance between two boundary points."""
        return max(
            sum((abs(a - b) for a, b in zip(p, q)), Fraction(0))
            for p, q in itertools.combinations(self.boundary_points, 2)
        )


def make_sg() -> IfsSpec:
    """Sierpinski gasket on the triangle (0,0), (1,0), (1/2, 7/8).

    The height 7/8 is an exact stand-in for sqrt(3)/2; the analysis only uses
    the cell combinatorics, and 7/8 keeps every vertex dyadic.
    """
    corners = (
        (Fraction(0), Fraction(0)),
        (Fraction(1), Fraction(0)),
        (Fraction(1, 2), Fraction(7, 8)),
    )
    half = Fraction(1, 2)
    maps = tuple(AffineMap.similarity(half, tuple(half * c for c in p)) for p in corners)
    r, mu = Fraction(3, 5), Fraction(1, 3)
    return IfsSpec(
        name="sg",
        maps=maps,
        boundary_points=corners,
        r=r,
        mu=mu,
        D=math.log(3) / math.log(5 / 3),
        gamma=math.log(2) / math.log(5 / 3),
        ambient_dim=2,
    )


def make_vicsek(L: int, N: int) -> IfsSpec:
    """Generalized Vicsek set V(L, N) in the unit cube [0,1]^N.

    Each axis is cut into 2L+1 pieces and the subcubes lying on the main
    diagonals are kept: the central cube plus L cubes towards each of the 2^N
    corners, J = 2^N L + 1 maps of ratio 1/(2L+1).
    """
    if isinstance(L, bool) or not isinstance(L, (int, np.integer)) or L < 1:
        raise ParameterError(f"Vicsek L must be an integer >= 1, got {L!r}")
    if isinstance(N, bool) or not isinstance(N, (int, np.integer)) or N < 2:
        raise ParameterError(f"Vicsek N must be an integer >= 2, got {N!r}")
    L, N = int(L), int(N)
    k = 2 * L + 1
    ratio = Fraction(1, k)
    corners = tuple(
        tuple(Fraction(c) for c in bits) for bits in itertools.product((0, 1), repeat=N)
    )
    # a corner c is fixed by the outermost cube of its diagonal, index 2L*c
    offsets = []
    for c in corners:
        offsets.append(tuple(ratio * 2 * L * x for x in c))
    # central cube, then the inner cubes of each diagonal arm
    offsets.append(tuple(ratio * L for _ in range(N)))
    for c in corners:
        sigma = [2 * x - 1 for x in c]
        for t in range(1, L):
            offsets.append(tuple(ratio * (L + t * s) for s in sigma))
    maps = tuple(AffineMap.similarity(ratio, off) for off in offsets)
    J = 2**N * L + 1
    assert len(maps) == J
    return IfsSpec(
        name=f"vicsek(L={L},N={N})",
        maps=maps,
        boundary_points=corners,
        r=Fraction(1, k),
        mu=Fraction(1, J),
        D=math.log(J) / math.log(k),
        gamma=1.0,
        ambient_dim=N,
        params=(("L", L), ("N", N)),
    )


def word_index(word: Word, J: int) -> int:
    """Position of ``word`` (letters 1..J) in lexicographic order of its length."""
    idx = 0
    for letter in word:
        if not 1 <= letter <= J:
            raise ParameterError(f"letter {letter} outside 1..{J}")
        idx = idx * J + (letter - 1)
    return idx


def index_word(idx: int, m: int, J: int) -> Word:
    letters = []
    for _ in range(m):
        idx, rem = divmod(idx, J)
        letters.append(rem + 1)
    return tuple(reversed(letters))


def format_word(word: Word, J: int) -> str:
    if J <= 9:
        return "".join(str(a) for a in word)
    return ".".join(str(a) for a in word)


def parse_word(text: str, J: int) -> Word:
    text = text.strip()
    if not text:
        return ()
    parts = text.split(".") if J > 9 else list(text)
    word = tuple(int(a) for a in parts)
    word_index(word, J)
    return word


def max_vertices() -> int:
    raw = os.environ.get(MAX_VERTICES_ENV)
    return int(raw) if raw else DEFAULT_MAX_VERTICES


@dataclass(frozen=True, eq=False)
class LevelGraph:
    """Vertices V_m, the m-edge relation and cell incidence of one level.

    ``cells[k]`` lists the vertex ids of F_w(q_0), F_w(q_1), ... for the word
    ``w = index_word(k, level, J)``.
    """

    spec: IfsSpec
    level: int
    vertices: tuple[Point, ...]
    edges: np.ndarray
    cells: np.ndarray
    boundary_ids: np.ndarray
    coordinate_index: dict[Point, int] = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def cell(self, word: Word) -> np.ndarray:
        if len(word) != self.level:
            raise ParameterError(f"word length {len(word)} != level {self.level}")
        return self.cells[word_index(word, self.spec.J)]

    def index_of(self, point: Sequence) -> int:
        key = tuple(Fraction(c) for c in point)
        try:
            return self.coordinate_index[key]
        except KeyError:
            raise ParameterError(f"{point} is not a vertex of V_{self.level}") from None

    def float_coords(self) -> np.ndarray:
        return np.array(self.vertices, dtype=float)

    def interior_ids(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_ids] = False
        return np.flatnonzero(mask)

    def subcells(self, word: Word) -> np.ndarray:
        """Row indices of the level cells lying inside F_word(X)."""
        n = len(word)
        if n > self.level:
            raise ParameterError(f"word of length {n} is finer than level {self.level}")
        span = self.spec.J ** (self.level - n)
        start = word_index(word, self.spec.J) * span
        return np.arange(start, start + span)


def _cell_coordinates(spec: IfsSpec, m: int) -> list[tuple[Point, ...]]:
    return _cell_coordinates_cached(spec, m)


@lru_cache(maxsize=32)
def _cell_coordinates_cached(spec: IfsSpec, m: int) -> list[tuple[Point, ...]]:
    if m == 0:
        return [spec.boundary_points]
    coarser = _cell_coordinates_cached(spec, m - 1)
    # F_{j w'} = F_j o F_{w'}: prepending letters keeps lexicographic word order
    return [tuple(f(p) for p in cell) for f in spec.maps for cell in coarser]


@lru_cache(maxsize=32)
def build_level(spec: IfsSpec, m: int) -> LevelGraph:
    """Enumerate all m-cells and identify shared corners by exact equality."""
    if isinstance(m, bool) or not isinstance(m, (int, np.integer)) or m < 0:
        raise ParameterError(f"level must be a non-negative integer, got {m!r}")
    m = int(m)
    limit = max_vertices()
    # every built-in family has at least as many vertices as cells
    if spec.J**m > limit:
        raise CapacityError(
            f"level {m} of {spec.name} has {spec.J**m} cells, above the vertex limit {limit}"
        )
    cell_coords = _cell_coordinates(spec, m)
    points = sorted({p for cell in cell_coords for p in cell})
    if len(points) > limit:
        raise CapacityError(
            f"level {m} of {spec.name} has {len(points)} vertices, above the limit {limit}"
        )
    index = {p: i for i, p in enumerate(points)}
    cells = np.array([[index[p] for p in cell] for cell in cell_coords], dtype=np.int64)
    cells = cells.reshape(len(cell_coords), spec.n_boundary)

    pairs = []
    for a, b in itertools.combinations(range(spec.n_boundary), 2):
        pairs.append(np.sort(cells[:, [a, b]], axis=1))
    edges = np.unique(np.concatenate(pairs), axis=0) if pairs else np.zeros((0, 2), np.int64)

    boundary = np.array([index[p] for p in spec.boundary_points], dtype=np.int64)
    cells.setflags(write=False)
    edges.setflags(write=False)
    boundary.setflags(write=False)
    return LevelGraph(
        spec=spec,
        level=m,
        vertices=tuple(points),
        edges=edges,
        cells=cells,
        boundary_ids=boundary,
        coordinate_index=index,
    )


def embedding(coarse: LevelGraph, fine: LevelGraph) -> np.ndarray:
    """Ids in ``fine`` of the vertices of ``coarse`` (V_n is a subset of V_m)."""
    if coarse.spec != fine.spec or coarse.level > fine.level:
        raise ParameterError("embedding needs two levels of one fractal, coarse first")
    return np.array([fine.coordinate_index[p] for p in coarse.vertices], dtype=np.int64)


def mass_vector(graph: LevelGraph, exact: bool = False) -> np.ndarray:
    """Lumped self-similar measure: each m-cell gives mu^m/|V_0| to each corner.

    With ``exact=True`` the weights are Fractions (object array) and sum to 1.
    """
    spec = graph.spec
    counts = np.bincount(graph.cells.ravel(), minlength=graph.n_vertices)
    share = spec.mu**graph.level / spec.n_boundary
    if exact:
        return np.array([share * int(c) for c in counts], dtype=object)
    return counts * float(share)


def write_graph_csv(graph: LevelGraph, path: str | os.PathLike) -> None:
    """VERTICES, EDGES and CELLS sections, each with its own header row."""
    J = graph.spec.J
    dim = graph.spec.ambient_dim
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# VERTICES\n")
        fh.write("id," + ",".join(f"x{i}" for i in range(dim)) + "\n")
        for i, p in enumerate(graph.vertices):
            fh.write(f"{i}," + ",".join(str(c) for c in p) + "\n")
        fh.write("# EDGES\n")
        fh.write("a,b\n")
        for a, b in graph.edges:
            fh.write(f"{a},{b}\n")
        fh.write("# CELLS\n")
        fh.write("word," + ",".join(f"c{i}" for i in range(graph.spec.n_boundary)) + "\n")
        for k, row in enumerate(graph.cells):
            word = format_word(index_word(k, graph.level, J), J)
            fh.write(word + "," + ",".join(str(int(v)) for v in row) + "\n")


def read_graph_csv(path: str | os.PathLike) -> dict[str, list[list[str]]]:
    """Parse a file written by :func:`write_graph_csv` into raw section rows."""
    sections: dict[str, list[list[str]]] = {}
    current = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                current = line[2:]
                sections[current] = []
            elif current is not None:
                sections[current].append(line.split(","))
    return sections
