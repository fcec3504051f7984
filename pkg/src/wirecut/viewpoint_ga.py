"""Genetic next-best-view search over a Fibonacci-sampled view sphere.

Candidates are fixed lattice points; individuals are candidate indices and
fitness is the area mismatch between the remnant material's silhouette and
the target mesh's silhouette under the candidate's camera.  The search is
discrete: crossover and mutation always land back on lattice points.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .projection import (
    Viewpoint,
    area_mismatch,
    camera_frame,
    rasterize_material_area,
    rasterize_mesh_area,
)

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass(frozen=True)
class CandidateSet:
    """Discrete viewpoint lattice with precomputed angular k-nearest neighbours."""

    viewpoints: tuple
    unit_dirs: np.ndarray      # (n, 3)
    knn: np.ndarray            # (n, k) indices by angular distance

    def __len__(self):
        return len(self.viewpoints)

    def subset(self, keep_indices) -> "CandidateSet":
        """Candidate set restricted to the given indices (knn recomputed)."""
        keep = np.asarray(sorted(keep_indices), dtype=int)
        vps = tuple(self.viewpoints[i] for i in keep)
        dirs = self.unit_dirs[keep]
        k = min(self.knn.shape[1], max(1, len(keep) - 1))
        return CandidateSet(vps, dirs, _knn_indices(dirs, k))


def _knn_indices(dirs: np.ndarray, k: int) -> np.ndarray:
    n = len(dirs)
    k = min(k, n - 1) if n > 1 else 0
    out = np.zeros((n, max(k, 1)), dtype=int) if k > 0 else np.zeros((n, 1), dtype=int)
    if k == 0:
        return out
    chunk = max(1, 4_000_000 // max(n, 1))
    for s in range(0, n, chunk):
        dots = dirs[s:s + chunk] @ dirs.T
        rows = np.arange(s, min(s + chunk, n))
        dots[np.arange(len(rows)), rows] = -np.inf  # exclude self
        part = np.argpartition(-dots, k - 1, axis=1)[:, :k]
        # order the k neighbours by decreasing dot (increasing angle)
        sub = np.take_along_axis(dots, part, axis=1)
        order = np.argsort(-sub, axis=1, kind="stable")
        out[rows] = np.take_along_axis(part, order, axis=1)
    return out


def fibonacci_sample(n: int, r: float = 2.0, hemisphere: bool = False) -> CandidateSet:
    """n near-uniform viewpoints on the sphere (or upper hemisphere) of radius r.

    Golden-angle azimuth with uniform-in-sin(elevation) spacing.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    i = np.arange(n)
    if hemisphere:
        z = (i + 0.5) / n
    else:
        z = 1.0 - (2.0 * i + 1.0) / n
    theta = np.mod(i * GOLDEN_ANGLE, 2 * np.pi)
    phi = np.arcsin(np.clip(z, -1.0, 1.0))
    vps = tuple(Viewpoint(phi=float(p), theta=float(t), r=r) for p, t in zip(phi, theta))
    dirs = np.stack([np.cos(phi) * np.cos(theta), np.cos(phi) * np.sin(theta), z], axis=1)
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    return CandidateSet(vps, dirs, _knn_indices(dirs, 10))


@dataclass(frozen=True)
class Individual:
    index: int
    fitness: float | None = None


@dataclass(frozen=True)
class Population:
    individuals: tuple
    generation: int = 0

    def index_set(self) -> frozenset:
        return frozenset(ind.index for ind in self.individuals)

    def best(self) -> Individual:
        return max(self.individuals, key=lambda i: (i.fitness, -i.index))


@dataclass(frozen=True)
class GAConfig:
    n_pop: int = 30
    p_uni: float = 0.30
    p_geo: float = 0.40
    p_nei: float = 0.30
    p_father: float = 0.50
    p_glo: float = 0.05
    p_loc: float = 0.10
    t_slerp: float = 0.5
    n_max: int = 15
    n_converge: int = 5
    rng_seed: int = 0
    dedup_retries: int = 50

    def __post_init__(self):
        if abs(self.p_uni + self.p_geo + self.p_nei - 1.0) > 1e-9:
            raise ValueError("crossover strategy probabilities must sum to 1")


def farthest_point_init(candidates: CandidateSet, n_pop: int, rng) -> Population:
    """Greedy farthest-point population over the lattice, random first pick."""
    n = len(candidates)
    if n_pop > n:
        raise ValueError("population larger than candidate set")
    first = int(rng.integers(n))
    chosen = [first]
    # angular distance is monotone in -dot, so maximize the minimum-angle
    min_dot = candidates.unit_dirs @ candidates.unit_dirs[first]
    for _ in range(n_pop - 1):
        min_dot[chosen] = np.inf
        nxt = int(np.argmin(min_dot))
        chosen.append(nxt)
        min_dot = np.maximum(min_dot, candidates.unit_dirs @ candidates.unit_dirs[nxt])
    return Population(tuple(Individual(i) for i in chosen), generation=0)


class FitnessEvaluator:
    """Cached area-mismatch fitness for candidate indices.

    Mesh silhouettes depend only on the viewpoint and may be shared across
    cut iterations through mesh_image_cache; material images are per state.
    """

    def __init__(self, material, mesh, candidates: CandidateSet,
                 resolution: int = 256, depth_samples: int = 128,
                 mesh_image_cache: dict | None = None,
                 extra_meshes: tuple = ()):
        self.material = material
        self.mesh = mesh
        self.candidates = candidates
        self.resolution = resolution
        self.depth_samples = depth_samples
        self.evaluation_count = 0
        self._mesh_images = mesh_image_cache if mesh_image_cache is not None else {}
        self._fitness = {}
        self.extra_meshes = extra_meshes

    def mesh_image(self, index: int):
        img = self._mesh_images.get(index)
        if img is None:
            frame = camera_frame(self.candidates.viewpoints[index])
            img = rasterize_mesh_area(self.mesh, frame, self.resolution)
            for extra in self.extra_meshes:
                other = rasterize_mesh_area(extra, frame, self.resolution)
                img = type(img)(img.resolution, img.bits | other.bits)
            self._mesh_images[index] = img
        return img

    def __call__(self, index: int) -> float:
        fit = self._fitness.get(index)
        if fit is None:
            frame = camera_frame(self.candidates.viewpoints[index])
            img_b = rasterize_material_area(self.material, frame, self.resolution,
                                            self.depth_samples)
            fit = float(area_mismatch(img_b, self.mesh_image(index)))
            self._fitness[index] = fit
            self.evaluation_count += 1
        return fit


def evaluate_fitness(v: Viewpoint, material, mesh, resolution: int = 256,
                     depth_samples: int = 128) -> float:
    """Uncached single-viewpoint fitness (pixels^2 of silhouette mismatch)."""
    frame = camera_frame(v)
    img_b = rasterize_material_area(material, frame, resolution, depth_samples)
    img_m = rasterize_mesh_area(mesh, frame, resolution)
    return float(area_mismatch(img_b, img_m))


# ---------------------------------------------------------------------------
# genetic operators


def roulette_select_parents(pop: Population, rng, cfg: GAConfig) -> list:
    """Fitness-proportional parent pairs, all pairs distinct (bounded retries)."""
    inds = pop.individuals
    fits = np.array([i.fitness for i in inds], dtype=float)
    if np.any(np.isnan(fits)):
        raise ValueError("all fitness values must be evaluated before selection")
    total = fits.sum()
    probs = fits / total if total > 0 else np.full(len(inds), 1.0 / len(inds))
    n_pairs = max(1, len(inds) // 2)

    pairs = []
    seen = set()
    for _ in range(cfg.dedup_retries):
        draw = rng.choice(len(inds), size=2 * n_pairs, p=probs, replace=True)
        for a, b in zip(draw[0::2], draw[1::2]):
            key = (min(inds[a].index, inds[b].index), max(inds[a].index, inds[b].index))
            if key not in seen:
                seen.add(key)
                pairs.append((inds[a], inds[b]))
            if len(pairs) == n_pairs:
                return pairs
    # degenerate population: allow duplicates to guarantee termination
    while len(pairs) < n_pairs:
        draw = rng.choice(len(inds), size=2, p=probs, replace=True)
        pairs.append((inds[draw[0]], inds[draw[1]]))
    return pairs


def _slerp(d0, d1, t):
    dot = float(np.clip(np.dot(d0, d1), -1.0, 1.0))
    omega = np.arccos(dot)
    if omega < 1e-12:
        return d0
    return (np.sin((1 - t) * omega) * d0 + np.sin(t * omega) * d1) / np.sin(omega)


def crossover(father: Individual, mother: Individual, candidates: CandidateSet,
              cfg: GAConfig, rng) -> Individual:
    """One child from two parents via a categorical choice of strategy.

    Strategies: uniform (copy a parent), geometric midpoint (slerp of parent
    directions snapped to the nearest lattice point) and neighbourhood
    (uniform pick in the parents' k-nearest-neighbour union).  Antipodal
    parents make slerp undefined and fall back to the neighbourhood strategy.
    """
    u = rng.random()
    if u < cfg.p_uni:
        idx = father.index if rng.random() < cfg.p_father else mother.index
        return Individual(idx)
    if u < cfg.p_uni + cfg.p_geo:
        d0 = candidates.unit_dirs[father.index]
        d1 = candidates.unit_dirs[mother.index]
        if np.dot(d0, d1) <= -1.0 + 1e-12:
            return _neighborhood_child(father, mother, candidates, rng)
        mid = _slerp(d0, d1, cfg.t_slerp)
        mid /= np.linalg.norm(mid)
        idx = int(np.argmax(candidates.unit_dirs @ mid))
        return Individual(idx)
    return _neighborhood_child(father, mother, candidates, rng)


def _neighborhood_child(father, mother, candidates, rng) -> Individual:
    pool = np.unique(np.concatenate([candidates.knn[father.index],
                                     candidates.knn[mother.index]]))
    return Individual(int(pool[rng.integers(len(pool))]))


def mutate(child: Individual, candidates: CandidateSet, cfg: GAConfig, rng) -> Individual:
    """Global reset with p_glo, else local neighbourhood hop with p_loc."""
    if rng.random() < cfg.p_glo:
        return Individual(int(rng.integers(len(candidates))))
    if rng.random() < cfg.p_loc:
        nbrs = candidates.knn[child.index]
        return Individual(int(nbrs[rng.integers(len(nbrs))]))
    return child


def elitist_select(old: Population, children: list, n_pop: int | None = None) -> Population:
    """Top-fitness survivors of parents plus children; index duplicates collapse."""
    n_pop = n_pop if n_pop is not None else len(old.individuals)
    best_by_index = {}
    for ind in list(old.individuals) + list(children):
        if ind.fitness is None:
            raise ValueError("all fitness values must be evaluated before selection")
        cur = best_by_index.get(ind.index)
        if cur is None or ind.fitness > cur.fitness:
            best_by_index[ind.index] = ind
    ranked = sorted(best_by_index.values(), key=lambda i: (-i.fitness, i.index))
    survivors = ranked[:n_pop]
    while len(survivors) < n_pop:  # degenerate: pad with best duplicates
        survivors.append(ranked[len(survivors) % len(ranked)])
    return Population(tuple(survivors), generation=old.generation + 1)


@dataclass(frozen=True)
class GAResult:
    viewpoint: Viewpoint
    index: int
    fitness: float
    generations: int
    evaluation_count: int
    best_history: tuple


def run_ga(material, mesh, candidates: CandidateSet, cfg: GAConfig,
           fitness=None) -> GAResult:
    """Full genetic search; returns the best viewpoint plus run diagnostics.

    fitness may inject a callable index -> value (used by tests and by the
    pipeline's cached evaluator); by default a FitnessEvaluator over
    (material, mesh) is built.
    """
    if fitness is None:
        fitness = FitnessEvaluator(material, mesh, candidates)

    def evaluated(ind: Individual) -> Individual:
        if ind.fitness is None:
            return replace(ind, fitness=float(fitness(ind.index)))
        return ind

    rng = np.random.default_rng(cfg.rng_seed)
    n_pop = min(cfg.n_pop, len(candidates))
    pop = farthest_point_init(candidates, n_pop, rng)
    pop = Population(tuple(evaluated(i) for i in pop.individuals), 0)
    best_history = [pop.best().fitness]

    if len(candidates) <= 2 or n_pop < 2:
        best = pop.best()
        return GAResult(candidates.viewpoints[best.index], best.index, best.fitness,
                        1, getattr(fitness, "evaluation_count", len(pop.individuals)),
                        tuple(best_history))

    unchanged = 0
    prev = pop.index_set()
    generations = 0
    for _ in range(cfg.n_max):
        generations += 1
        pairs = roulette_select_parents(pop, rng, cfg)
        children = [mutate(crossover(f, m, candidates, cfg, rng), candidates, cfg, rng)
                    for f, m in pairs]
        children = [evaluated(c) for c in children]
        new_pop = elitist_select(pop, children, n_pop)
        if new_pop.best().fitness < pop.best().fitness:
            raise AssertionError("elitism violated: best fitness decreased")
        pop = new_pop
        best_history.append(pop.best().fitness)
        cur = pop.index_set()
        unchanged = unchanged + 1 if cur == prev else 0
        prev = cur
        if unchanged >= cfg.n_converge:
            break

    best = pop.best()
    return GAResult(candidates.viewpoints[best.index], best.index, best.fitness,
                    generations, getattr(fitness, "evaluation_count", -1),
                    tuple(best_history))
