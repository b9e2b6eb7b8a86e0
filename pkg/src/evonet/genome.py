"""Fixed-layout binary chromosome.

The bit string is a concatenation of five segments:

=========  =========================  ==========================================
segment    bits                       meaning
=========  =========================  ==========================================
alg        2                          trainer kind, index into BP, SCG, QNA, LM
params     4 x 8                      trainer hyperparameters, each mapped
                                      linearly into its allowed range
arch       5                          hidden count, ``1 + v * max_hidden // 32``
act        max_hidden x 3             activation code ``v % 5`` per neuron slot
weights    W_max x 16                 weight value ``-8 + 16 v / 65535``
=========  =========================  ==========================================

Integers are most-significant-bit first. ``W_max`` is the parameter count of
the largest network; the weight genes follow the network's canonical flat
order for ``max_hidden`` neurons, and a decoded network with ``h`` neurons
reads the genes of neuron slots ``0..h-1``, output-weight slots ``0..h-1``
and the output bias. Genes beyond the active ones are carried unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .activations import ActivationKind
from .network import NetworkPhenotype, NetworkShape, flatten_params, n_params, unflatten_params
from .trainers import MAX_PARAMS, PARAM_RANGES, SCG_MIN_SIGMA, TrainerKind, TrainerSpec

ALG_BITS = 2
PARAM_BITS = 8
ARCH_BITS = 5
ACT_BITS = 3
WEIGHT_BITS = 16
WEIGHT_LIMIT = 8.0
INIT_WEIGHT_LIMIT = 0.3
SEGMENTS = ("alg", "params", "arch", "act", "weights")

_PARAM_MAX = (1 << PARAM_BITS) - 1
_WEIGHT_MAX = (1 << WEIGHT_BITS) - 1


@dataclass(frozen=True)
class GenomeLayout:
    n_inputs: int
    max_hidden: int

    def __post_init__(self):
        if self.n_inputs < 1:
            raise ValueError("n_inputs must be at least 1")
        if not 1 <= self.max_hidden <= 1 << ARCH_BITS:
            raise ValueError(f"max_hidden must be in [1, {1 << ARCH_BITS}]")

    @property
    def max_params(self) -> int:
        return n_params(self.n_inputs, self.max_hidden)

    @cached_property
    def slices(self) -> dict[str, slice]:
        sizes = {
            "alg": ALG_BITS,
            "params": MAX_PARAMS * PARAM_BITS,
            "arch": ARCH_BITS,
            "act": self.max_hidden * ACT_BITS,
            "weights": self.max_params * WEIGHT_BITS,
        }
        out, start = {}, 0
        for name in SEGMENTS:
            out[name] = slice(start, start + sizes[name])
            start += sizes[name]
        return out

    @property
    def length(self) -> int:
        return self.slices["weights"].stop

    def weight_gene_index(self, n_hidden: int) -> np.ndarray:
        """Positions among the ``W_max`` weight genes used by an ``n_hidden`` network."""
        d, H = self.n_inputs, self.max_hidden
        hidden = np.arange(n_hidden * (d + 1))
        out_w = H * (d + 1) + np.arange(n_hidden)
        return np.concatenate([hidden, out_w, [H * (d + 1) + H]])

    def active_bit_mask(self, genome: "Genome") -> np.ndarray:
        """Boolean mask of bits that influence the decoded network and trainer."""
        mask = np.zeros(self.length, dtype=bool)
        sl = self.slices
        mask[sl["alg"]] = True
        mask[sl["arch"]] = True
        kind = TrainerKind(_to_int(genome.bits[sl["alg"]]))
        mask[sl["params"].start:sl["params"].start + len(PARAM_RANGES[kind]) * PARAM_BITS] = True
        h = decode_hidden_count(genome.bits[sl["arch"]], self.max_hidden)
        mask[sl["act"].start:sl["act"].start + h * ACT_BITS] = True
        w = sl["weights"].start
        for g in self.weight_gene_index(h):
            mask[w + g * WEIGHT_BITS:w + (g + 1) * WEIGHT_BITS] = True
        return mask


@dataclass(frozen=True, eq=False)
class Genome:
    layout: GenomeLayout
    bits: np.ndarray

    def __post_init__(self):
        b = np.array(self.bits, dtype=np.uint8)
        if b.shape != (self.layout.length,):
            raise ValueError(f"genome needs {self.layout.length} bits, got {b.size}")
        if np.any(b > 1):
            raise ValueError("genome bits must be 0 or 1")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    def __eq__(self, other):
        if not isinstance(other, Genome):
            return NotImplemented
        return self.layout == other.layout and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.layout, self.bits.tobytes()))

    def __len__(self):
        return self.layout.length

    def segment(self, name: str) -> np.ndarray:
        return self.bits[self.layout.slices[name]]

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    @classmethod
    def from_string(cls, layout: GenomeLayout, text: str) -> "Genome":
        if set(text) - {"0", "1"}:
            raise ValueError("genome string may only contain 0 and 1")
        return cls(layout, np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0"))

    def to_dict(self) -> dict:
        return {"n_inputs": self.layout.n_inputs, "max_hidden": self.layout.max_hidden, "bits": self.to_string()}

    @classmethod
    def from_dict(cls, d: dict) -> "Genome":
        return cls.from_string(GenomeLayout(d["n_inputs"], d["max_hidden"]), d["bits"])

    def sort_key(self) -> bytes:
        return self.bits.tobytes()


def _to_int(bits: np.ndarray) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


def _from_int(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def _words(bits: np.ndarray, width: int) -> np.ndarray:
    """Unsigned integers from consecutive ``width``-bit MSB-first words."""
    w = bits.reshape(-1, width).astype(np.int64)
    return w @ (1 << np.arange(width - 1, -1, -1, dtype=np.int64))


def _to_words(values: np.ndarray, width: int) -> np.ndarray:
    v = np.asarray(values, dtype=np.int64)[:, None]
    return ((v >> np.arange(width - 1, -1, -1)) & 1).astype(np.uint8).ravel()


def decode_hidden_count(arch_bits: np.ndarray, max_hidden: int) -> int:
    return 1 + ((_to_int(arch_bits) * max_hidden) >> ARCH_BITS)


def encode_hidden_count(h: int, max_hidden: int) -> np.ndarray:
    """Smallest architecture code that decodes to ``h``."""
    if not 1 <= h <= max_hidden:
        raise ValueError(f"hidden count {h} outside [1, {max_hidden}]")
    v = -((-(h - 1) << ARCH_BITS) // max_hidden)  # ceil((h-1) * 32 / max_hidden)
    return _from_int(v, ARCH_BITS)


def decode_weights(words: np.ndarray) -> np.ndarray:
    return -WEIGHT_LIMIT + 2.0 * WEIGHT_LIMIT * (np.asarray(words, dtype=np.float64) / _WEIGHT_MAX)


def encode_weights(values) -> tuple[np.ndarray, int]:
    """Nearest 16-bit codes for ``values``; also returns how many were clamped."""
    v = np.asarray(values, dtype=np.float64)
    clamped = int(np.count_nonzero((v < -WEIGHT_LIMIT) | (v > WEIGHT_LIMIT)))
    v = np.clip(v, -WEIGHT_LIMIT, WEIGHT_LIMIT)
    words = np.rint((v + WEIGHT_LIMIT) / (2.0 * WEIGHT_LIMIT) * _WEIGHT_MAX).astype(np.int64)
    return np.clip(words, 0, _WEIGHT_MAX), clamped


def decode_trainer(bits_alg: np.ndarray, bits_params: np.ndarray) -> TrainerSpec:
    kind = TrainerKind(_to_int(bits_alg))
    return decode_trainer_params(kind, bits_params)


def decode_trainer_params(kind: TrainerKind, bits_params: np.ndarray) -> TrainerSpec:
    words = _words(bits_params, PARAM_BITS)
    values = []
    for r, v in zip(PARAM_RANGES[kind], words):
        x = r.low + (r.high - r.low) * (int(v) / _PARAM_MAX)
        values.append(min(max(x, r.low), r.high))
    if kind is TrainerKind.SCG and values[0] < SCG_MIN_SIGMA:
        values[0] = SCG_MIN_SIGMA
    return TrainerSpec(kind, tuple(values))


def decode(genome: Genome, kind_override: TrainerKind | None = None) -> tuple[NetworkPhenotype, TrainerSpec]:
    """Network and trainer described by ``genome``.

    ``kind_override`` fixes the trainer kind regardless of the algorithm
    gene; the hyperparameter genes are then read against that kind's ranges.
    """
    layout = genome.layout
    kind = kind_override if kind_override is not None else TrainerKind(_to_int(genome.segment("alg")))
    spec = decode_trainer_params(kind, genome.segment("params"))
    h = decode_hidden_count(genome.segment("arch"), layout.max_hidden)
    act_codes = _words(genome.segment("act"), ACT_BITS)[:h]
    acts = tuple(ActivationKind.from_code(int(c)) for c in act_codes)
    all_words = _words(genome.segment("weights"), WEIGHT_BITS)
    weights = decode_weights(all_words[layout.weight_gene_index(h)])
    return unflatten_params(NetworkShape(layout.n_inputs, acts), weights), spec


def encode(net: NetworkPhenotype, spec: TrainerSpec, layout: GenomeLayout,
           template: Genome | None = None) -> Genome:
    """Bit string that decodes to ``net`` and ``spec`` (weights to 16-bit resolution).

    Genes that do not affect the decoded result are copied from ``template``
    (zeros without one). Architecture and activation genes already decoding
    to the requested value are also kept from the template, so
    ``encode(*decode(g), g.layout, template=g) == g``.
    """
    if net.n_inputs != layout.n_inputs or net.n_hidden > layout.max_hidden:
        raise ValueError("network does not fit the genome layout")
    bits = np.zeros(layout.length, dtype=np.uint8) if template is None else template.bits.copy()
    sl = layout.slices
    bits[sl["alg"]] = _from_int(spec.kind.value, ALG_BITS)

    p_words = _words(bits[sl["params"]], PARAM_BITS)
    for i, (r, x) in enumerate(zip(PARAM_RANGES[spec.kind], spec.params)):
        p_words[i] = 0 if r.high == r.low else int(round((x - r.low) / (r.high - r.low) * _PARAM_MAX))
    bits[sl["params"]] = _to_words(np.clip(p_words, 0, _PARAM_MAX), PARAM_BITS)
    if template is not None:
        # keep the template's parameter codes when they already decode identically
        same = decode_trainer_params(spec.kind, template.bits[sl["params"]])
        if same.params == decode_trainer_params(spec.kind, bits[sl["params"]]).params:
            bits[sl["params"]] = template.bits[sl["params"]]

    h = net.n_hidden
    if decode_hidden_count(bits[sl["arch"]], layout.max_hidden) != h:
        bits[sl["arch"]] = encode_hidden_count(h, layout.max_hidden)

    a_words = _words(bits[sl["act"]], ACT_BITS)
    for j, kind in enumerate(net.activations):
        if int(a_words[j]) % 5 != kind.code:
            a_words[j] = kind.code
    bits[sl["act"]] = _to_words(a_words, ACT_BITS)

    write_weights(bits, layout, flatten_params(net), h)
    return Genome(layout, bits)


def write_weights(bits: np.ndarray, layout: GenomeLayout, params: np.ndarray, n_hidden: int) -> int:
    """Overwrite the active weight genes of ``bits`` in place; returns the clamp count."""
    sl = layout.slices["weights"]
    words = _words(bits[sl], WEIGHT_BITS)
    codes, clamped = encode_weights(params)
    words[layout.weight_gene_index(n_hidden)] = codes
    bits[sl] = _to_words(words, WEIGHT_BITS)
    return clamped


def with_trained_weights(genome: Genome, params: np.ndarray) -> tuple[Genome, int]:
    """Lamarckian write-back: ``genome`` with its active weight genes set to ``params``."""
    h = decode_hidden_count(genome.segment("arch"), genome.layout.max_hidden)
    bits = genome.bits.copy()
    clamped = write_weights(bits, genome.layout, params, h)
    return Genome(genome.layout, bits), clamped


_INIT_LO = int(np.ceil((WEIGHT_LIMIT - INIT_WEIGHT_LIMIT) / (2 * WEIGHT_LIMIT) * _WEIGHT_MAX))
_INIT_HI = int(np.floor((WEIGHT_LIMIT + INIT_WEIGHT_LIMIT) / (2 * WEIGHT_LIMIT) * _WEIGHT_MAX))


def random_genome(rng: np.random.Generator, layout: GenomeLayout) -> Genome:
    """Uniform random bits, except weight genes, which decode uniformly within +/-0.3."""
    bits = rng.integers(0, 2, layout.length, dtype=np.uint8)
    words = rng.integers(_INIT_LO, _INIT_HI + 1, layout.max_params)
    bits[layout.slices["weights"]] = _to_words(words, WEIGHT_BITS)
    return Genome(layout, bits)


def mutate(genome: Genome, rate: float, rng: np.random.Generator) -> Genome:
    """Per segment, with probability ``rate``, flip one uniformly chosen bit."""
    bits = genome.bits.copy()
    for name in SEGMENTS:
        sl = genome.layout.slices[name]
        if rng.random() < rate:
            bits[sl.start + int(rng.integers(sl.stop - sl.start))] ^= 1
    return Genome(genome.layout, bits)
