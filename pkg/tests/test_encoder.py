"""Feature-hash task encoding and observation assembly."""

import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from goalsmith.encoder import (
    EMBEDDING_DIM,
    STATE_DIM,
    EmptyTextError,
    TaskEmbedding,
    assemble_observation,
    encode,
)
from goalsmith.scene import task_catalog

MTRL_TEXTS = [t.description for t in task_catalog() if t.family == "reward_mtrl"]
KOREAN_M04 = "큐브를 테이블 중앙으로부터 20cm 위로 옮겨주세요"

words = st.text(
    alphabet=st.characters(whitelist_categories=("L", "N")), min_size=1, max_size=12
)
sentences = st.lists(words, min_size=1, max_size=12).map(" ".join)


class TestEncode:
    def test_dimension_and_norm(self):
        v = encode("Move the cube to the center of the table.").vector
        assert v.shape == (EMBEDDING_DIM,)
        assert float(np.linalg.norm(v)) == pytest.approx(1.0)

    def test_deterministic_within_process(self):
        a = encode("lift the cube")
        b = encode("lift the cube")
        assert np.array_equal(a.vector, b.vector)

    def test_deterministic_across_processes(self):
        script = (
            "from goalsmith.encoder import encode\n"
            "print(encode('lift the cube').vector.tobytes().hex())\n"
        )
        runs = [
            subprocess.run(
                [sys.executable, "-c", script], capture_output=True, text=True, check=True
            ).stdout.strip()
            for _ in range(2)
        ]
        assert runs[0] == runs[1]
        assert runs[0] == encode("lift the cube").vector.tobytes().hex()

    def test_case_insensitive(self):
        assert np.array_equal(encode("Lift The Cube").vector, encode("lift the cube").vector)

    def test_word_order_matters(self):
        assert not np.array_equal(
            encode("move cube left").vector, encode("left cube move").vector
        )

    def test_empty_text_raises(self):
        with pytest.raises(EmptyTextError):
            encode("")
        with pytest.raises(EmptyTextError):
            encode("   !!! ...")

    def test_mtrl_texts_pairwise_distinct(self):
        texts = MTRL_TEXTS + [KOREAN_M04]
        assert len(texts) == 10
        vectors = [encode(text).vector for text in texts]
        for i in range(len(vectors)):
            for j in range(i + 1, len(vectors)):
                assert not np.array_equal(vectors[i], vectors[j]), (texts[i], texts[j])

    def test_korean_text_encodes(self):
        v = encode(KOREAN_M04).vector
        assert float(np.linalg.norm(v)) == pytest.approx(1.0)

    @given(sentences)
    def test_any_tokenizable_text_is_unit_norm(self, text):
        v = encode(text).vector
        assert v.shape == (EMBEDDING_DIM,)
        assert float(np.linalg.norm(v)) == pytest.approx(1.0)


class TestTaskEmbedding:
    def test_rejects_wrong_dimension(self):
        with pytest.raises(ValueError):
            TaskEmbedding(vector=np.ones(16))

    def test_rejects_non_unit_norm(self):
        with pytest.raises(ValueError):
            TaskEmbedding(vector=np.ones(EMBEDDING_DIM))

    def test_vector_is_read_only(self):
        e = encode("hold still")
        with pytest.raises(ValueError):
            e.vector[0] = 1.0


class TestObservation:
    def test_layout_is_state_then_embedding(self):
        e = encode("stack the cubes")
        state = np.arange(STATE_DIM, dtype=np.float64)
        obs = assemble_observation(state, e)
        assert obs.shape == (STATE_DIM + EMBEDDING_DIM,)
        assert np.array_equal(obs[:STATE_DIM], state)
        assert np.array_equal(obs[STATE_DIM:], e.vector)

    def test_rejects_wrong_state_shape(self):
        with pytest.raises(ValueError):
            assemble_observation(np.zeros(6), encode("x y"))

    def test_rejects_non_finite_state(self):
        state = np.zeros(STATE_DIM)
        state[0] = np.nan
        with pytest.raises(ValueError):
            assemble_observation(state, encode("x y"))
