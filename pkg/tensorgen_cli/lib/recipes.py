"""
Example configs for the main families of tensor decomposition algorithms.

Each recipe names the generator features it exercises, the algorithms it is meant to test and the
kind of real data it imitates. Every recipe config is a valid GenConfig.
"""

import copy
import typing as t
from dataclasses import dataclass, field

from tensorgen_cli.core.errors import ParameterError

__all__ = ["Recipe", "RECIPES", "list_recipes", "get_recipe"]


@dataclass(frozen=True)
class Recipe:
    """
    An algorithm family and an executable example config for it.

    Attributes:
        name (str): The recipe name, used by ``tg-cli recipes show``.
        family (str): The algorithm family.
        features (str): The generator features the config uses.
        algorithms (str): Algorithms the data is suited to.
        data (str): The real-world data it imitates.
        config (Dict[str, Any]): The GenConfig document.
    """

    name: str
    family: str
    features: str
    algorithms: str
    data: str
    config: t.Dict[str, t.Any] = field(default_factory=dict, hash=False, compare=False)

    def document(self) -> t.Dict[str, t.Any]:
        """Returns a copy of the config, safe to modify."""
        return copy.deepcopy(self.config)


def _output(name: str) -> t.Dict[str, t.Any]:
    return {"format": "csv", "path": f"{name}.csv"}


RECIPES: t.Tuple[Recipe, ...] = (
    Recipe(
        name="traditional",
        family="Unconstrained CP / Tucker",
        features="multi_normal factors",
        algorithms="CP-ALS, Tucker-ALS, gradient-based CP",
        data="Clean multilinear data",
        config={
            "seed": 1,
            "shape": [30, 40, 50],
            "model": {"type": "cp", "rank": 3},
            "generator": {"method": "randn"},
            "output": _output("traditional"),
        },
    ),
    Recipe(
        name="orthogonal",
        family="Orthogonal Tucker",
        features="orthogonal factors, random core",
        algorithms="HOSVD, HOOI",
        data="Subspace-structured data",
        config={
            "seed": 2,
            "shape": [20, 25, 30],
            "model": {"type": "tucker", "ranks": [3, 4, 5], "weights": {"method": "normal"}},
            "generator": {"method": "orthogonal"},
            "output": _output("orthogonal"),
        },
    ),
    Recipe(
        name="nonnegative",
        family="Non-negative CP",
        features="stochastic factors, uniform weights",
        algorithms="Multiplicative updates, HALS, non-negative ALS",
        data="Images, spectra and other non-negative measurements",
        config={
            "seed": 3,
            "shape": [40, 40, 20],
            "model": {"type": "cp", "rank": 4, "weights": {"method": "uniform"}},
            "generator": {"method": "stochastic"},
            "output": _output("nonnegative"),
        },
    ),
    Recipe(
        name="boolean",
        family="Boolean CP",
        features="binary factors",
        algorithms="Boolean CP, clustering-based decompositions",
        data="Social networks and co-occurrence data",
        config={
            "seed": 4,
            "shape": [50, 50, 20],
            "model": {"type": "cp", "rank": 5},
            "generator": {"method": "binary"},
            "output": _output("boolean"),
        },
    ),
    Recipe(
        name="shift_invariant",
        family="Shift-invariant CP",
        features="periodic temporal factor (sine and square waves)",
        algorithms="Shift-invariant and convolutive CP",
        data="EEG and other oscillating signals",
        config={
            "seed": 5,
            "shape": [20, 30, 100],
            "model": {"type": "cp", "rank": 2},
            "temporal_mode": 2,
            "modes": [
                None,
                None,
                {
                    "temporal": {
                        "kind": "periodic",
                        "waves": [
                            {"waveform": "sine", "frequency": 3},
                            {"waveform": "square", "frequency": 5, "amplitude": 0.5},
                        ],
                    }
                },
            ],
            "output": _output("shift_invariant"),
        },
    ),
    Recipe(
        name="seasonal",
        family="Any time-aware decomposition",
        features="multiple seasonality with growth",
        algorithms="Temporal CP, forecasting-oriented factorizations",
        data="Human-generated activity (traffic, energy, web)",
        config={
            "seed": 6,
            "shape": [20, 15, 336],
            "model": {"type": "cp", "rank": 2},
            "generator": {"method": "rand"},
            "temporal_mode": 2,
            "modes": [
                None,
                None,
                {
                    "temporal": {
                        "kind": "seasonal",
                        "seasons": [
                            {"cycle_length": 24, "pattern": "double_peak", "growth_rate": 0.02},
                            {"cycle_length": 168, "pattern": "single_peak"},
                        ],
                    }
                },
            ],
            "output": _output("seasonal"),
        },
    ),
    Recipe(
        name="streaming",
        family="Online CP",
        features="streaming temporal factor",
        algorithms="OnlineCP, PARAFAC-SDT, PARAFAC-RLST",
        data="Slowly drifting data streams",
        config={
            "seed": 7,
            "shape": [20, 30, 500],
            "model": {"type": "cp", "rank": 3},
            "temporal_mode": 2,
            "modes": [None, None, {"temporal": {"kind": "streaming", "epsilon": 0.05}}],
            "output": _output("streaming"),
        },
    ),
    Recipe(
        name="change_points",
        family="Incremental tensor analysis",
        features="structural shift and singular outlier on the temporal factor",
        algorithms="DTA, STA, WTA and change detection on factor streams",
        data="Streams with concept drift",
        config={
            "seed": 8,
            "shape": [15, 15, 100],
            "model": {"type": "cp", "rank": 2},
            "temporal_mode": 2,
            "modes": [
                None,
                None,
                {
                    "temporal": {
                        "kind": "periodic",
                        "waves": [
                            {"waveform": "sine", "frequency": 2},
                            {"waveform": "cosine", "frequency": 4},
                        ],
                    }
                },
            ],
            "effects": [
                {"kind": "change_point", "column": 0, "start": 60, "end": 99},
                {"kind": "change_point", "column": 1, "start": 30, "end": 30, "magnitude": 5.0},
            ],
            "output": _output("change_points"),
        },
    ),
    Recipe(
        name="anomalies",
        family="Anomaly detection",
        features="injected low-rank anomaly, white noise",
        algorithms="Residual-based and robust tensor anomaly detectors",
        data="Network traffic and sensor grids",
        config={
            "seed": 9,
            "shape": [30, 30, 40],
            "model": {"type": "cp", "rank": 3},
            "effects": [
                {"kind": "anomaly", "block": [[5, 10], [5, 10], [20, 30]], "amplitude": 3.0},
                {"kind": "tensor_awgn", "snr_db": 20},
            ],
            "output": _output("anomalies"),
        },
    ),
    Recipe(
        name="noisy",
        family="Robust CP / Tucker",
        features="factor noise, dense white noise, sparse gross noise",
        algorithms="Robust and regularized decompositions",
        data="Noisy measurements with outliers",
        config={
            "seed": 10,
            "shape": [30, 30, 30],
            "model": {"type": "cp", "rank": 3},
            "effects": [
                {"kind": "factor_noise", "eta": 0.05},
                {"kind": "tensor_awgn", "snr_db": 10},
                {"kind": "sparse_awgn", "snr_db": -10, "density": 0.01},
            ],
            "output": _output("noisy"),
        },
    ),
    Recipe(
        name="collinear",
        family="Degenerate / collinear CP",
        features="congruent factor columns, unit-norm tensor",
        algorithms="CP with line search, regularized ALS, swamp studies",
        data="Chemometrics (fluorescence spectroscopy)",
        config={
            "seed": 11,
            "shape": [30, 30, 30],
            "model": {"type": "cp", "rank": 3},
            "generator": {"method": "uniform"},
            "effects": [
                {"kind": "column_congruence", "mode": 0, "c": 0.9},
                {"kind": "sign_fix"},
                {"kind": "normalize_tensor"},
            ],
            "output": _output("collinear"),
        },
    ),
    Recipe(
        name="sparse",
        family="Sparse-friendly CP",
        features="sparse factors and a sparsified tensor",
        algorithms="CP-APR, sparse ALS, completion methods",
        data="Incomplete data, recommendation logs",
        config={
            "seed": 12,
            "shape": [60, 60, 60],
            "model": {"type": "cp", "rank": 4},
            "generator": {"method": "uniform"},
            "effects": [
                {"kind": "sparsify_factors", "fraction": 0.5},
                {"kind": "sparsify_tensor", "fraction": 0.5},
            ],
            "output": _output("sparse"),
        },
    ),
    Recipe(
        name="sparse_counts",
        family="Sparse Bayesian count models",
        features="gamma factors, Poisson counts",
        algorithms="Bayesian Poisson tensor factorization, CP-APR",
        data="Event counts (interactions, clicks, messages)",
        config={
            "seed": 13,
            "shape": [40, 40, 40],
            "model": {"type": "cp", "rank": 5},
            "generator": {"method": "gamma", "mu": 1.0, "sigma2": 0.1, "theta": 0.5},
            "effects": [{"kind": "poisson_counts"}],
            "output": _output("sparse_counts"),
        },
    ),
)


def list_recipes() -> t.List[Recipe]:
    """Returns every recipe, in display order."""
    return list(RECIPES)


def get_recipe(name: str) -> Recipe:
    """
    Returns the recipe called ``name``.

    Raises:
        ParameterError: If there is no such recipe.
    """
    for recipe in RECIPES:
        if recipe.name == name:
            return recipe
    raise ParameterError(
        f"Unknown recipe {name!r}, expected one of {', '.join(r.name for r in RECIPES)}"
    )
