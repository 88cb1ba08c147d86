# impactgraph/config.py

import configparser
import dataclasses
import os
from dataclasses import dataclass, field

from .errors import ConfigError

# -------- Paths --------
# Resolve paths relative to this config file's location
CONFIG_DIR = os.path.dirname(os.path.abspath(__file__))
PROJECT_ROOT = os.path.dirname(CONFIG_DIR)

DATA_DIR = os.path.join(PROJECT_ROOT, "data")
OUT_DIR = os.path.join(PROJECT_ROOT, "outputs")

# ---- Artifact file names (inside the output dir) ----
NODES_FILE = "nodes.jsonl"
EDGES_FILE = "edges.jsonl"
NEIGHBOR_SETS_FILE = "neighbor_sets.bin"
NEIGHBOR_SETS_DEBUG_FILE = "neighbor_sets.jsonl"
NEIGHBOR_SETS_META_FILE = "neighbor_sets.meta.json"
EMBEDDINGS_FILE = "embeddings.bin"
PRETRAIN_CHECKPOINT_FILE = "pretrain.ck"
MODEL_CHECKPOINT_FILE = "model.ck"
DATASET_FILE = "dataset.jsonl"
HISTORY_FILE = "history.json"
REPORT_FILE = "report.json"
PREDICTIONS_FILE = "predictions.csv"
STATS_FILE = "stats.json"
EXPERIMENT_FILE = "experiment.json"
SUMMARY_FILE = "graph_summary.json"

# ---- Environment ----
THREADS_ENV = "HDGNN_THREADS"

# -------- Random walk sampling --------
RESTART_PROB = 0.5
WALK_LENGTH = 30
WALKS_PER_NODE = 5
TYPE_COEFFS = (1.0, 1.0, 1.0)          # alpha (paper), beta (author), gamma (venue)
SAMPLES_PER_TYPE = (10, 10, 3)         # k_p, k_a, k_v
INFLUENCE_MODES = ("degree", "pagerank")

# -------- Observation protocol --------
REFERENCE_TIME = 2.0     # t_r, years after birth
PREDICTION_TIME = 20.0   # t_p, years after birth
MIN_OBSERVED = 10
MAX_SEQ = 100
SPLIT_FRACTIONS = (0.5, 0.25, 0.25)

# -------- Node encoder --------
HIDDEN_DIM = 64          # d_h, content MLP output and content Bi-GRU per direction
NEIGHBOR_DIM = 128       # d_s, neighbor Bi-GRU output (d_s / 2 per direction)
CANDIDATE_DIM = 128      # d_c, shared attention space
EMBED_DIM = 128          # d_E
ATTENTION_HEADS = 4
LEAKY_SLOPE = 0.01
TITLE_HASH_DIM = 64
FALLBACK_HASH_DIM = 16
SKIPGRAM_WINDOW = 5
NEG_SAMPLES = 5

# -------- Cascade model --------
AUTHOR_SEQ_LEN = 6
CITATION_SEQ_LEN = 100
GRU_UNITS = (128, 64)
MLP_UNITS = (64, 32)
AGGREGATORS = ("rnn", "max_pool", "sum_pool")
VARIANTS = {
    "full": {},
    "maxp": {"aggregator": "max_pool"},
    "sump": {"aggregator": "sum_pool"},
    "noauthor": {"use_author": False},
    "novenue": {"use_venue": False},
}

# -------- Optimization --------
OPTIMIZERS = ("adam", "sgd")
LEARNING_RATE = 1e-3
LR_GRID = (1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
BATCH_SIZE = 32
MAX_EPOCHS = 100
PATIENCE = 10


@dataclass(frozen=True)
class WalkConfig:
    q: float = RESTART_PROB
    walk_length: int = WALK_LENGTH
    walks_per_node: int = WALKS_PER_NODE
    type_coeffs: tuple = TYPE_COEFFS
    samples_per_type: tuple = SAMPLES_PER_TYPE
    influence: str = "degree"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ConfigError(f"walk.q must lie in [0, 1], got {self.q}")
        if self.walk_length < 1 or self.walks_per_node < 1:
            raise ConfigError("walk.walk_length and walk.walks_per_node must be positive")
        if len(self.type_coeffs) != 3 or any(c <= 0 for c in self.type_coeffs):
            raise ConfigError(f"walk.type_coeffs needs 3 positive values, got {self.type_coeffs}")
        if len(self.samples_per_type) != 3 or any(k < 1 for k in self.samples_per_type):
            raise ConfigError(f"walk.samples_per_type needs 3 positive integers, got {self.samples_per_type}")
        if self.influence not in INFLUENCE_MODES:
            raise ConfigError(f"walk.influence must be one of {INFLUENCE_MODES}, got {self.influence!r}")


@dataclass(frozen=True)
class ObservationConfig:
    t_r: float = REFERENCE_TIME
    t_p: float = PREDICTION_TIME
    min_observed: int = MIN_OBSERVED
    max_seq: int = MAX_SEQ
    split_fractions: tuple = SPLIT_FRACTIONS
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.t_r < self.t_p:
            raise ConfigError(f"observation needs 0 < t_r < t_p, got t_r={self.t_r}, t_p={self.t_p}")
        if self.min_observed < 0 or self.max_seq < 1:
            raise ConfigError("observation.min_observed must be >= 0 and max_seq >= 1")
        if len(self.split_fractions) != 3 or any(f <= 0 for f in self.split_fractions):
            raise ConfigError(f"observation.split_fractions needs 3 positive values, got {self.split_fractions}")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ConfigError(f"observation.split_fractions must sum to 1, got {self.split_fractions}")


@dataclass(frozen=True)
class EncoderConfig:
    d_h: int = HIDDEN_DIM
    d_s: int = NEIGHBOR_DIM
    d_c: int = CANDIDATE_DIM
    d_e: int = EMBED_DIM
    heads: int = ATTENTION_HEADS
    leaky_slope: float = LEAKY_SLOPE
    title_hash_dim: int = TITLE_HASH_DIM
    window: int = SKIPGRAM_WINDOW
    neg_samples: int = NEG_SAMPLES
    pretrain_epochs: int = 1
    pretrain_batch: int = 256
    pretrain_pairs: int = 20000
    pretrain_lr: float = 1e-3
    finetune: bool = True
    degree_window: float = REFERENCE_TIME
    seed: int = 0

    def __post_init__(self):
        if self.heads < 1:
            raise ConfigError("encoder.heads must be >= 1")
        if self.d_s % 2:
            raise ConfigError(f"encoder.d_s must be even (split over two directions), got {self.d_s}")
        if min(self.d_h, self.d_s, self.d_c, self.d_e, self.title_hash_dim) < 1:
            raise ConfigError("encoder dimensions must be positive")
        if self.pretrain_epochs < 0 or self.pretrain_batch < 1 or self.pretrain_pairs < 1:
            raise ConfigError("encoder pretraining sizes must be positive")
        if self.window < 1 or self.neg_samples < 0:
            raise ConfigError("encoder.window must be >= 1 and neg_samples >= 0")
        if self.degree_window <= 0:
            raise ConfigError(f"encoder.degree_window must be positive, got {self.degree_window}")


@dataclass(frozen=True)
class ModelConfig:
    author_seq_len: int = AUTHOR_SEQ_LEN
    citation_seq_len: int = CITATION_SEQ_LEN
    gru_units: tuple = GRU_UNITS
    mlp_units: tuple = MLP_UNITS
    aggregator: str = "rnn"
    use_author: bool = True
    use_venue: bool = True
    prepend_target: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.aggregator not in AGGREGATORS:
            raise ConfigError(f"model.aggregator must be one of {AGGREGATORS}, got {self.aggregator!r}")
        if len(self.gru_units) != 2 or len(self.mlp_units) != 2:
            raise ConfigError("model.gru_units and model.mlp_units need exactly two values")
        if self.author_seq_len < 1 or self.citation_seq_len < 1:
            raise ConfigError("model sequence lengths must be positive")

    def variant(self, name):
        """Return the ablation variant of this config (full, maxp, sump, noauthor, novenue)."""
        if name not in VARIANTS:
            raise ConfigError(f"unknown variant {name!r}; expected one of {sorted(VARIANTS)}")
        return dataclasses.replace(self, **VARIANTS[name])


@dataclass(frozen=True)
class SynthConfig:
    n_papers: int = 3000
    n_authors: int = 1000
    n_venues: int = 10
    years: float = 40.0
    pa_exponent: float = 0.25
    tail_exponent: float = 1.5       # CCDF slope of final citation counts
    venue_quality_spread: float = 0.6
    productivity_shape: float = 1.5
    burst: float = 0.5
    citation_rate: float = 4.0       # citations per year of a fresh unit-fitness paper
    max_authors_per_paper: int = 6
    max_papers_per_author: int = 60
    seed: int = 0

    def __post_init__(self):
        if min(self.n_papers, self.n_authors, self.n_venues) < 0:
            raise ConfigError("synth counts must be non-negative")
        if self.years <= 0 or self.citation_rate < 0:
            raise ConfigError("synth.years must be positive and citation_rate non-negative")
        if self.productivity_shape <= 0 or self.tail_exponent <= 0 or self.burst < 0:
            raise ConfigError("synth.productivity_shape and tail_exponent must be positive, burst non-negative")
        if not 0.0 <= self.pa_exponent < 1.0:
            raise ConfigError(f"synth.pa_exponent must lie in [0, 1), got {self.pa_exponent}")
        if self.max_authors_per_paper < 1 or self.max_papers_per_author < 1:
            raise ConfigError("synth author limits must be positive")


@dataclass(frozen=True)
class OptimizerConfig:
    name: str = "adam"
    lr: float = LEARNING_RATE
    lr_grid: tuple = LR_GRID
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = BATCH_SIZE
    max_epochs: int = MAX_EPOCHS
    patience: int = PATIENCE
    seed: int = 0

    def __post_init__(self):
        if self.name not in OPTIMIZERS:
            raise ConfigError(f"optimizer.name must be one of {OPTIMIZERS}, got {self.name!r}")
        if self.lr <= 0 or any(lr <= 0 for lr in self.lr_grid):
            raise ConfigError("learning rates must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("optimizer.batch_size, max_epochs and patience must be positive")


@dataclass(frozen=True)
class PathsConfig:
    nodes: str = os.path.join(DATA_DIR, NODES_FILE)
    edges: str = os.path.join(DATA_DIR, EDGES_FILE)
    out: str = OUT_DIR


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    epoch_year: float = 0.0
    walk: WalkConfig = field(default_factory=WalkConfig)
    observation: ObservationConfig = field(default_factory=ObservationConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def with_seed(self, seed):
        """Push one seed into every seeded section."""
        seeded = {
            name: dataclasses.replace(getattr(self, name), seed=seed)
            for name in ("walk", "observation", "encoder", "model", "synth", "optimizer")
        }
        return dataclasses.replace(self, seed=seed, **seeded)

    def with_out(self, out):
        return dataclasses.replace(self, paths=dataclasses.replace(self.paths, out=out))


# ----------------------------------
# INI loading
# ----------------------------------
SECTIONS = {
    "walk": WalkConfig,
    "observation": ObservationConfig,
    "encoder": EncoderConfig,
    "model": ModelConfig,
    "synth": SynthConfig,
    "optimizer": OptimizerConfig,
    "paths": PathsConfig,
}
RUN_KEYS = {"seed": int, "epoch_year": float}


def _coerce(section, key, raw, default):
    """
    Convert one INI string to the type of the field's default.
    Tuples are comma-separated; element types follow the default's elements.
    """
    try:
        if isinstance(default, bool):
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, tuple):
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            kind = type(default[0]) if default else float
            return tuple(kind(p) for p in parts)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {type(default).__name__}") from None


def _resolve_path(value, base_dir):
    value = os.path.expanduser(value)
    return value if os.path.isabs(value) else os.path.normpath(os.path.join(base_dir, value))


def load_run_config(path=None):
    """
    Read a RunConfig from an INI file.
    - missing file -> ConfigError
    - unknown section or key -> ConfigError (typos in hyperparameter names)
    - relative paths are resolved against the config file's directory
    - the [run] seed seeds every section unless the section sets its own
    """
    if path is None:
        return RunConfig()
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")

    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, "r", encoding="utf-8") as f:
            parser.read_file(f)
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from None

    unknown = [s for s in parser.sections() if s not in SECTIONS and s != "run"]
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {unknown}")

    run_values = {}
    if parser.has_section("run"):
        for key, raw in parser.items("run"):
            if key not in RUN_KEYS:
                raise ConfigError(f"{path}: unknown key [run] {key}")
            run_values[key] = _coerce("run", key, raw, RUN_KEYS[key](0))
    seed = run_values.get("seed", 0)

    base_dir = os.path.dirname(os.path.abspath(path))
    built = {}
    for name, cls in SECTIONS.items():
        defaults = cls()
        known = {f.name for f in dataclasses.fields(cls)}
        values = {}
        if "seed" in known:
            values["seed"] = seed
        if parser.has_section(name):
            for key, raw in parser.items(name):
                if key not in known:
                    raise ConfigError(f"{path}: unknown key [{name}] {key}")
                values[key] = _coerce(name, key, raw, getattr(defaults, key))
        if name == "paths":
            values = {k: _resolve_path(v, base_dir) for k, v in values.items()}
        built[name] = cls(**values)

    # degree slots follow the observation window unless set explicitly
    if not parser.has_option("encoder", "degree_window"):
        built["encoder"] = dataclasses.replace(built["encoder"], degree_window=built["observation"].t_r)

    return RunConfig(**run_values, **built)


def thread_count():
    """Parallelism cap from HDGNN_THREADS (default 1)."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1, got {n}")
    return n
