"""Checkpoint loading and inference.

A checkpoint directory contains one subdirectory per model (the
subdirectory name is the model id) in the standard saved-checkpoint
layout (config.json + weights).  Models run in evaluation mode on a
fixed device with gradients disabled; identical requests produce
bit-identical outputs within a process.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch


@dataclass
class ModelHandle:
    """Capability report for one loaded checkpoint."""

    model_id: str
    hidden_dim: int
    n_layers: int
    max_input_tokens: int

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "hidden_dim": self.hidden_dim,
            "n_layers": self.n_layers,
            "max_input_tokens": self.max_input_tokens,
        }


class LoadedModel:
    def __init__(self, model_id: str, path: Path, device: str = "cpu"):
        from transformers import AutoModel

        self.model = AutoModel.from_pretrained(str(path))
        self.model.eval()
        self.device = torch.device(device)
        self.model.to(self.device)
        config = self.model.config
        self.handle = ModelHandle(
            model_id=model_id,
            hidden_dim=int(config.hidden_size),
            n_layers=int(config.num_hidden_layers),
            max_input_tokens=int(config.max_position_embeddings),
        )
        self.vocab_size = int(config.vocab_size)

    @torch.no_grad()
    def hidden_states(self, sentences: list[list[int]], layer_indices: list[int]
                      ) -> list[dict[int, np.ndarray]]:
        """Per-sentence, per-layer token matrices (token_count x hidden_dim).

        Sentences are padded into one batch; padded positions are masked
        out of attention and stripped from the result, so each sentence's
        rows depend only on its own tokens.
        """
        max_len = max(len(s) for s in sentences)
        batch = torch.zeros((len(sentences), max_len), dtype=torch.long,
                            device=self.device)
        mask = torch.zeros((len(sentences), max_len), dtype=torch.long,
                           device=self.device)
        for i, ids in enumerate(sentences):
            batch[i, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            mask[i, : len(ids)] = 1
        output = self.model(input_ids=batch, attention_mask=mask,
                            output_hidden_states=True)
        # hidden_states[0] is the embedding output; [k] is block k's output.
        states = output.hidden_states
        results = []
        for i, ids in enumerate(sentences):
            per_layer = {
                k: states[k][i, : len(ids)].cpu().numpy().astype("<f4")
                for k in layer_indices
            }
            results.append(per_layer)
        return results

    @torch.no_grad()
    def embedding_output(self, sentences: list[list[int]]) -> list[np.ndarray]:
        """Pre-encoder embedding output, for convention verification."""
        return [m[0] for m in self.hidden_states(sentences, [0])]


class ModelRegistry:
    """Loads every checkpoint under a root directory at startup."""

    def __init__(self, checkpoint_dir: str | Path, device: str = "cpu"):
        self.models: dict[str, LoadedModel] = {}
        root = Path(checkpoint_dir)
        if root.is_dir():
            for sub in sorted(root.iterdir()):
                if (sub / "config.json").exists():
                    self.models[sub.name] = LoadedModel(sub.name, sub, device)

    def handles(self) -> list[ModelHandle]:
        return [m.handle for m in self.models.values()]

    def get(self, model_id: str) -> LoadedModel | None:
        return self.models.get(model_id)
