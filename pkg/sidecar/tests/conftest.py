import os
from pathlib import Path

import pytest
import torch

os.environ.setdefault("HF_HUB_OFFLINE", "1")

# Filled by the acceptance tests; echoed at the end of the run.
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("secondary acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)


TINY_VOCAB = 512
TINY_DIM = 32
TINY_LAYERS = 4
TINY_MAX_TOKENS = 64


@pytest.fixture(scope="session")
def checkpoint_dir(tmp_path_factory) -> Path:
    """A checkpoint root with one tiny random-weight bidirectional encoder.

    Seeded construction keeps the weights stable for the whole session,
    which is all the determinism contracts need.
    """
    from transformers import BertConfig, BertModel

    root = tmp_path_factory.mktemp("checkpoints")
    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=TINY_VOCAB,
        hidden_size=TINY_DIM,
        num_hidden_layers=TINY_LAYERS,
        num_attention_heads=4,
        intermediate_size=64,
        max_position_embeddings=TINY_MAX_TOKENS,
    )
    model = BertModel(config)
    model.eval()
    model.save_pretrained(root / "tiny-encoder")
    return root


@pytest.fixture(scope="session")
def app(checkpoint_dir):
    from dsi_sidecar import create_app

    return create_app(str(checkpoint_dir))


@pytest.fixture(scope="session")
def client(app):
    from fastapi.testclient import TestClient

    return TestClient(app, raise_server_exceptions=False)
