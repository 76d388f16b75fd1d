"""Model checkpoint serialization.

A checkpoint is one JSON file holding the user-model weights (pretrained
and final), the value-network weights with their target copies, and the
optimizer moments, under a header identifying the encoder.  Loading
refuses a checkpoint written under a different encoder or dimension.
Serialization is deterministic: identical models produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoder import DIM, ENCODER_ID
from .qnet import QNetParams
from .user_model import UserModelParams

MODEL_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    u_pretrained: UserModelParams
    u_final: UserModelParams
    q_params: QNetParams
    q_opt_state: dict | None = None
    u_opt_state: dict | None = None


def _user_to_dict(p: UserModelParams) -> dict:
    return {"W": p.W.tolist(), "b": p.b.tolist()}


def _user_from_dict(d: dict) -> UserModelParams:
    return UserModelParams(
        W=np.asarray(d["W"], dtype=float), b=np.asarray(d["b"], dtype=float)
    )


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    q = ckpt.q_params
    payload = {
        "header": {
            "encoder_id": ENCODER_ID,
            "d": DIM,
            "model_version": MODEL_VERSION,
        },
        "u_pretrained": _user_to_dict(ckpt.u_pretrained),
        "u_final": _user_to_dict(ckpt.u_final),
        "q": {
            "W1": q.W1.tolist(), "b1": q.b1.tolist(),
            "W2": q.W2.tolist(), "b2": q.b2,
            "tW1": q.tW1.tolist(), "tb1": q.tb1.tolist(),
            "tW2": q.tW2.tolist(), "tb2": q.tb2,
        },
        "q_opt": ckpt.q_opt_state,
        "u_opt": ckpt.u_opt_state,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    header = payload.get("header", {})
    if header.get("encoder_id") != ENCODER_ID or header.get("d") != DIM:
        raise CheckpointError(
            f"checkpoint encoder {header.get('encoder_id')!r}/d="
            f"{header.get('d')} does not match {ENCODER_ID!r}/d={DIM}"
        )
    if header.get("model_version") != MODEL_VERSION:
        raise CheckpointError(
            f"unsupported model_version {header.get('model_version')!r}"
        )
    q = payload["q"]
    q_params = QNetParams(
        W1=np.asarray(q["W1"], dtype=float), b1=np.asarray(q["b1"], dtype=float),
        W2=np.asarray(q["W2"], dtype=float), b2=float(q["b2"]),
        tW1=np.asarray(q["tW1"], dtype=float),
        tb1=np.asarray(q["tb1"], dtype=float),
        tW2=np.asarray(q["tW2"], dtype=float), tb2=float(q["tb2"]),
    )
    return Checkpoint(
        u_pretrained=_user_from_dict(payload["u_pretrained"]),
        u_final=_user_from_dict(payload["u_final"]),
        q_params=q_params,
        q_opt_state=payload.get("q_opt"),
        u_opt_state=payload.get("u_opt"),
    )
