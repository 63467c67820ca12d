"""Small autoregressive transformer decoder with dual heads and
keyword-aware input encoding, plus a portable binary checkpoint container.

The input layout per example is

    <bos> <kw> k1 [k2 k3] <kw> | <speakerX> u1... | ... | <speakerY> response... <eos>

with three input-state channels: keyword-state over the front block
(including <bos>), and per-speaker states over each utterance block. The
classification head reads the hidden state at the closing <eos>.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
from torch import Tensor

from .corpus import Vocabulary, normalize

KW_STATE, SPK1_STATE, SPK2_STATE = 0, 1, 2
IGNORE_TARGET = -100

CHECKPOINT_MAGIC = b"KWDL"
CHECKPOINT_VERSION = 1


class CheckpointError(Exception):
    pass


class UnrecognizedFormatError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class ShapeMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


@dataclass
class ModelConfig:
    """Architecture knobs; the defaults are the desk-scale configuration."""

    vocab_size: int
    dim: int = 256
    layers: int = 4
    heads: int = 4
    ffn_dim: int = 1024
    max_len: int = 256
    dropout: float = 0.1

    def __post_init__(self):
        if self.dim % self.heads != 0:
            raise ValueError("embedding dim must be divisible by head count")

    def parameter_count(self) -> int:
        """Closed-form total with weight tying (LM head shares token emb)."""
        d, f, v, L = self.dim, self.ffn_dim, self.vocab_size, self.layers
        per_layer = (3 * d * d + 3 * d) + (d * d + d) + (d * f + f) + (f * d + d) + 4 * d
        return v * d + self.max_len * d + 3 * d + L * per_layer + 2 * d + (d + 1)


@dataclass
class EncodedInput:
    """Parallel id sequences for one example plus target/anchor bookkeeping.

    `lm_targets[i]` is the id predicted from position i (IGNORE_TARGET off
    the response block); `lm_mask[i]` marks exactly those prediction steps.
    `cls_anchor` is the <eos> position, or -1 for generation prefixes.
    """

    token_ids: list[int]
    position_ids: list[int]
    state_ids: list[int]
    lm_targets: list[int]
    cls_anchor: int
    response_start: int

    def __post_init__(self):
        n = len(self.token_ids)
        if not (len(self.position_ids) == len(self.state_ids) == len(self.lm_targets) == n):
            raise ValueError("encoded sequences must have equal length")

    def __len__(self) -> int:
        return len(self.token_ids)

    @property
    def lm_mask(self) -> list[bool]:
        return [t != IGNORE_TARGET for t in self.lm_targets]


def encode_example(
    context: list[list[int]],
    response: list[int],
    keywords: list[str],
    vocab: Vocabulary,
    max_len: int = 256,
    complete: bool = True,
    kwpred: bool = False,
) -> EncodedInput:
    """Build the model input for a (context, response-prefix, keywords) tuple.

    `complete=True` closes the response with <eos>, sets LM targets over the
    response block and anchors classification at <eos>; `complete=False`
    produces a generation prefix ending right after the block opener (plus
    any forced response prefix). Over-long inputs drop the oldest context
    turns first; keyword block and response are never truncated.
    """
    if len(context) > 5:
        context = context[-5:]
    kw_ids = []
    for word in keywords[:3]:
        ids = vocab.encode(normalize(word))
        kw_ids.append(ids[0] if ids else vocab.unk_id)
    opener = vocab.kwpred_id if kwpred else vocab.speaker2_id

    def assemble(ctx: list[list[int]]) -> EncodedInput:
        tokens = [vocab.bos_id, vocab.kw_sep_id, *kw_ids, vocab.kw_sep_id]
        states = [KW_STATE] * len(tokens)
        # responder is <speaker2>; alternate backwards over the context
        for i, turn in enumerate(ctx):
            speaker_is_1 = (len(ctx) - i) % 2 == 1
            tok = vocab.speaker1_id if speaker_is_1 else vocab.speaker2_id
            state = SPK1_STATE if speaker_is_1 else SPK2_STATE
            tokens.append(tok)
            states.append(state)
            tokens.extend(turn)
            states.extend([state] * len(turn))
        response_start = len(tokens)
        resp_state = SPK2_STATE
        tokens.append(opener)
        states.append(resp_state)
        tokens.extend(response)
        states.extend([resp_state] * len(response))
        if complete:
            tokens.append(vocab.eos_id)
            states.append(resp_state)
        targets = [IGNORE_TARGET] * len(tokens)
        if complete:
            # position response_start predicts the first response token, and
            # so on through the closing <eos>
            for i in range(response_start, len(tokens) - 1):
                targets[i] = tokens[i + 1]
        anchor = len(tokens) - 1 if complete else -1
        return EncodedInput(
            token_ids=tokens,
            position_ids=list(range(len(tokens))),
            state_ids=states,
            lm_targets=targets,
            cls_anchor=anchor,
            response_start=response_start,
        )

    ctx = list(context)
    enc = assemble(ctx)
    while len(enc) > max_len and ctx:
        ctx = ctx[1:]
        enc = assemble(ctx)
    if len(enc) > max_len:
        raise ValueError(
            f"example of length {len(enc)} exceeds max_len {max_len} even with no context"
        )
    return enc


class Block(nn.Module):
    """Pre-LN transformer block: causal self-attention + GELU MLP."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        d = config.dim
        self.heads = config.heads
        self.ln1 = nn.LayerNorm(d)
        self.attn_qkv = nn.Linear(d, 3 * d)
        self.attn_out = nn.Linear(d, d)
        self.ln2 = nn.LayerNorm(d)
        self.mlp_in = nn.Linear(d, config.ffn_dim)
        self.mlp_out = nn.Linear(config.ffn_dim, d)
        self.drop = nn.Dropout(config.dropout)

    def forward(self, x: Tensor, causal_bias: Tensor) -> Tensor:
        B, T, d = x.shape
        h = self.ln1(x)
        q, k, v = self.attn_qkv(h).split(d, dim=2)
        hd = d // self.heads
        q = q.view(B, T, self.heads, hd).transpose(1, 2)
        k = k.view(B, T, self.heads, hd).transpose(1, 2)
        v = v.view(B, T, self.heads, hd).transpose(1, 2)
        att = (q @ k.transpose(-2, -1)) * (hd ** -0.5) + causal_bias[:T, :T]
        att = torch.softmax(att, dim=-1)
        att = self.drop(att)
        y = (att @ v).transpose(1, 2).reshape(B, T, d)
        x = x + self.drop(self.attn_out(y))
        h = self.ln2(x)
        h = self.mlp_out(torch.nn.functional.gelu(self.mlp_in(h)))
        return x + self.drop(h)


class DialogModel(nn.Module):
    """Decoder-only transformer with tied LM head and a scalar
    next-utterance classification head."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        d = config.dim
        self.tok_emb = nn.Embedding(config.vocab_size, d)
        self.pos_emb = nn.Embedding(config.max_len, d)
        self.state_emb = nn.Embedding(3, d)
        self.drop = nn.Dropout(config.dropout)
        self.blocks = nn.ModuleList(Block(config) for _ in range(config.layers))
        self.ln_f = nn.LayerNorm(d)
        self.cls_head = nn.Linear(d, 1)
        mask = torch.full((config.max_len, config.max_len), float("-inf"))
        self.register_buffer("causal_bias", torch.triu(mask, diagonal=1), persistent=False)

    def hidden_states(self, tokens: Tensor, positions: Tensor, states: Tensor) -> Tensor:
        T = tokens.shape[1]
        if T > self.config.max_len:
            raise ValueError(f"input length {T} exceeds max_len {self.config.max_len}")
        x = self.tok_emb(tokens) + self.pos_emb(positions) + self.state_emb(states)
        x = self.drop(x)
        for block in self.blocks:
            x = block(x, self.causal_bias)
        return self.ln_f(x)

    def forward(self, tokens: Tensor, positions: Tensor, states: Tensor) -> tuple[Tensor, Tensor]:
        """Returns (logits [B,T,V], per-position cls scores [B,T])."""
        h = self.hidden_states(tokens, positions, states)
        logits = h @ self.tok_emb.weight.t()
        return logits, self.cls_head(h).squeeze(-1)

    def forward_example(self, enc: EncodedInput) -> tuple[Tensor, Tensor]:
        """Single-example forward: (logits [T,V], cls score at the anchor)."""
        device = self.tok_emb.weight.device
        tokens = torch.tensor([enc.token_ids], dtype=torch.long, device=device)
        positions = torch.tensor([enc.position_ids], dtype=torch.long, device=device)
        states = torch.tensor([enc.state_ids], dtype=torch.long, device=device)
        logits, cls_scores = self(tokens, positions, states)
        anchor = enc.cls_anchor if enc.cls_anchor >= 0 else len(enc) - 1
        return logits[0], cls_scores[0, anchor]


def build_model(config: ModelConfig, seed: int = 0, dtype: torch.dtype = torch.float32) -> DialogModel:
    """Seeded construction so two builds produce bitwise-equal parameters."""
    torch.manual_seed(seed)
    model = DialogModel(config)
    for name, p in model.named_parameters():
        if name.endswith("weight") and p.dim() >= 2:
            nn.init.normal_(p, mean=0.0, std=0.02)
        elif name.endswith("bias"):
            nn.init.zeros_(p)
    return model.to(dtype)


def _write_block(fh, data: bytes) -> None:
    fh.write(struct.pack("<I", len(data)))
    fh.write(data)


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedCheckpointError(f"expected {n} bytes, got {len(data)}")
    return data


def _read_block(fh) -> bytes:
    (n,) = struct.unpack("<I", _read_exact(fh, 4))
    return _read_exact(fh, n)


def save_checkpoint(
    model: DialogModel,
    vocab: Vocabulary,
    meta: dict,
    path: str | Path,
) -> None:
    """Write the versioned binary container: magic, version, length-prefixed
    UTF-8 config and vocab blocks, then named float32 little-endian tensors."""
    state = model.state_dict()
    with Path(path).open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        config_doc = {"model": asdict(model.config), "meta": meta}
        _write_block(fh, json.dumps(config_doc, ensure_ascii=False).encode("utf-8"))
        _write_block(fh, vocab.to_json().encode("utf-8"))
        fh.write(struct.pack("<I", len(state)))
        for name, tensor in state.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            shape = tuple(tensor.shape)
            fh.write(struct.pack("<B", len(shape)))
            for dim in shape:
                fh.write(struct.pack("<I", dim))
            data = tensor.detach().to(torch.float32).contiguous().numpy()
            if data.dtype.byteorder == ">":
                data = data.byteswap()
            fh.write(data.tobytes())


def load_checkpoint(
    path: str | Path,
    expected_config: ModelConfig | None = None,
) -> tuple[dict[str, Tensor], ModelConfig, Vocabulary, dict]:
    """Read a checkpoint back; errors are typed: unrecognized format, version
    mismatch, shape mismatch (naming the tensor), truncated file."""
    with Path(path).open("rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise UnrecognizedFormatError(f"bad magic bytes {magic!r}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != CHECKPOINT_VERSION:
            raise VersionMismatchError(f"checkpoint version {version}, expected {CHECKPOINT_VERSION}")
        config_doc = json.loads(_read_block(fh).decode("utf-8"))
        config = ModelConfig(**config_doc["model"])
        meta = config_doc.get("meta", {})
        vocab = Vocabulary.from_json(_read_block(fh).decode("utf-8"))
        (n_tensors,) = struct.unpack("<I", _read_exact(fh, 4))
        state: dict[str, Tensor] = {}
        for _ in range(n_tensors):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2))
            name = _read_exact(fh, name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1))
            shape = tuple(struct.unpack("<I", _read_exact(fh, 4))[0] for _ in range(ndim))
            count = 1
            for dim in shape:
                count *= dim
            raw = _read_exact(fh, 4 * count)
            array = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
            state[name] = torch.from_numpy(array)

    reference = DialogModel(config).state_dict()
    for name, tensor in reference.items():
        if name not in state:
            raise ShapeMismatchError(f"missing tensor {name}")
        if tuple(state[name].shape) != tuple(tensor.shape):
            raise ShapeMismatchError(
                f"tensor {name}: stored {tuple(state[name].shape)}, config implies {tuple(tensor.shape)}"
            )
    if expected_config is not None and expected_config != config:
        for name, tensor in DialogModel(expected_config).state_dict().items():
            stored = state.get(name)
            if stored is not None and tuple(stored.shape) != tuple(tensor.shape):
                raise ShapeMismatchError(
                    f"tensor {name}: stored {tuple(stored.shape)}, expected {tuple(tensor.shape)}"
                )
        raise CheckpointError("stored config differs from the expected config")
    return state, config, vocab, meta


def load_model(path: str | Path) -> tuple[DialogModel, Vocabulary, dict]:
    """Convenience loader: instantiated eval-mode model plus vocab and meta."""
    state, config, vocab, meta = load_checkpoint(path)
    model = DialogModel(config)
    model.load_state_dict(state)
    model.eval()
    return model, vocab, meta
