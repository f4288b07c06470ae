import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netsparse.comm_graph import SeededMatrixGen, distributed_measure, star_edges, validate
from netsparse.errors import DimensionMismatch, SeedMismatch
from netsparse.plant import InputProcess, build_consensus_model, step
from netsparse.protocol import EncodeOutput, LinkParams, Mode, frame, output_dimension, unframe
from netsparse.receiver import ReceiverState
from netsparse.transmitter import TransmitterState


def subspace_trajectory(n, steps, seed):
    """States confined to a fixed 2-dim subspace."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, 2)))
    return [Q @ rng.standard_normal(2) for _ in range(steps)]


def run_link(params, A, states, blocks=None):
    n = A.shape[0]
    blocks = blocks or (1,) * n
    tx = TransmitterState(params, A)
    rx = ReceiverState(params, A, blocks)
    graph = validate(star_edges(len(blocks)), len(blocks))
    gen = SeededMatrixGen(params.seed)
    outs, ests = [], []
    for k, x in enumerate(states):
        out = tx.encode_step(x, k)
        if out.mode == Mode.COMPRESSED:
            y, _ = distributed_measure(graph, gen, k, out.p, np.split(x, np.cumsum(blocks)[:-1]))
            out = out.with_payload(y)
        outs.append(out)
        ests.append(rx.decode_step(k, unframe(frame(out))))
    return tx, rx, outs, ests


def test_output_dimension():
    assert output_dimension(7, 1.3, 30) == 10
    assert output_dimension(10, 1.3, 30) == 13
    assert output_dimension(0, 1.3, 30) == 1
    assert output_dimension(29, 1.3, 30) == 30


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 40), st.floats(1.0, 3.0), st.integers(1, 60))
def test_output_dimension_covers_sparsity(s, os, n):
    p = output_dimension(s, os, n)
    assert 1 <= p <= n
    assert p >= min(s, n)


def test_frame_round_trip():
    msg = EncodeOutput(5, Mode.COMPRESSED, 3, s=2, payload=np.array([1.0, -2.5, 3e-300]), digest=b"abcdefgh")
    back = unframe(frame(msg))
    assert (back.k, back.mode, back.p, back.s, back.digest) == (5, Mode.COMPRESSED, 3, 2, b"abcdefgh")
    np.testing.assert_array_equal(back.payload, msg.payload)


def test_frame_rejects_mismatched_payload():
    with pytest.raises(DimensionMismatch):
        frame(EncodeOutput(0, Mode.COMPRESSED, 3, payload=np.zeros(2)))
    data = frame(EncodeOutput(0, Mode.COMPRESSED, 2, payload=np.zeros(2)))
    with pytest.raises(DimensionMismatch):
        unframe(data[:-8])


def test_digest_tracks_params():
    assert LinkParams().digest() == LinkParams().digest()
    assert LinkParams().digest() != LinkParams(seed=1).digest()


def test_warmup_sends_full_state():
    A = np.eye(4)
    states = subspace_trajectory(4, 5, 0)
    tx, rx, outs, ests = run_link(LinkParams(atoms=6, h_backward=5, h_forward=1), A, states)
    assert all(o.mode == Mode.FULL_STATE for o in outs)
    for x, e in zip(states, ests):
        np.testing.assert_array_equal(x, e)
    assert tx.dictionary is None


@pytest.mark.parametrize("seed", range(3))
def test_subspace_trajectory_is_two_sparse(seed):
    n = 12
    params = LinkParams(atoms=12, h_backward=6, h_forward=2, seed=seed)
    states = subspace_trajectory(n, 14, seed)
    tx, rx, outs, ests = run_link(params, np.eye(n), states)
    compressed = [o for o in outs if o.mode == Mode.COMPRESSED]
    assert len(compressed) == 8
    for o in compressed:
        assert o.delta_s < 1e-6
        assert o.s <= 2
        assert o.p >= o.s
    for x, e in zip(states, ests):
        assert np.linalg.norm(x - e) < 1e-6 * (1 + np.linalg.norm(x))


def test_encoder_invariants_on_consensus_run():
    model = build_consensus_model(10, 0.05, 0.025, seed=1)
    proc = InputProcess({2, 7}, seed=1, input_sizes=model.input_sizes)
    params = LinkParams(atoms=10, h_backward=5, h_forward=2, seed=1)
    tx = TransmitterState(params, model.nominal_A)
    x = model.initial_state
    for k in range(15):
        out = tx.encode_step(x, k)
        if out.mode == Mode.COMPRESSED:
            snap = tx.last
            D = snap.dictionary
            I = list(D.active_set)
            off = [i for i in range(D.n_atoms) if i not in D.active_set]
            assert np.all(snap.code[off] == 0)
            np.testing.assert_allclose(D.atoms @ snap.code, D.atoms[:, I] @ snap.code[I], rtol=0, atol=1e-14 * (1 + np.linalg.norm(x)))
            assert snap.delta_s <= np.linalg.norm(x) + 1e-12
            assert out.p >= out.s
            assert len(tx.history) <= params.h_backward
        x = step(model, x, proc.sample(k))


def test_receiver_matches_transmitter_dictionary_at_first_compressed_step():
    n = 8
    params = LinkParams(atoms=8, h_backward=4, h_forward=2)
    states = subspace_trajectory(n, 5, 3)
    tx, rx, outs, _ = run_link(params, np.eye(n), states)
    assert outs[-1].mode == Mode.COMPRESSED
    np.testing.assert_array_equal(tx.last.dictionary.atoms, rx.last.dictionary.atoms)


def test_receiver_residual_orthogonal():
    model = build_consensus_model(12, 0.05, 0.025, seed=2)
    proc = InputProcess({1, 5, 9}, seed=2, input_sizes=model.input_sizes)
    params = LinkParams(atoms=12, h_backward=5, h_forward=2, seed=2)
    states, x = [], model.initial_state
    for k in range(12):
        states.append(x)
        x = step(model, x, proc.sample(k))
    _, rx, outs, _ = run_link(params, model.nominal_A, states)
    snap = rx.last
    C = rx.gen.matrix(snap.k, outs[-1].p, (1,) * 12)
    I = list(snap.dictionary.active_set)
    assert np.all(snap.code[[i for i in range(12) if i not in I]] == 0)
    M = C @ snap.dictionary.atoms[:, I]
    r = outs[-1].payload - C @ snap.dictionary.atoms @ snap.code
    assert np.max(np.abs(M.T @ r)) <= 1e-8 * (1 + np.linalg.norm(M) * np.linalg.norm(outs[-1].payload))


def test_receiver_empty_dictionary_gives_zero():
    # zero history -> empty active set -> zero estimate
    params = LinkParams(atoms=4, h_backward=2, h_forward=1)
    rx = ReceiverState(params, np.eye(3), (1, 1, 1))
    for k in range(2):
        rx.decode_step(k, EncodeOutput(k, Mode.FULL_STATE, 3, payload=np.zeros(3), digest=params.digest()))
    est = rx.decode_step(2, EncodeOutput(2, Mode.COMPRESSED, 1, payload=np.array([0.7]), digest=params.digest()))
    np.testing.assert_array_equal(est, np.zeros(3))
    assert rx.last.dictionary.sparsity == 0


def test_receiver_seed_mismatch():
    rx = ReceiverState(LinkParams(seed=1), np.eye(2), (1, 1))
    msg = EncodeOutput(0, Mode.FULL_STATE, 2, payload=np.zeros(2), digest=LinkParams(seed=2).digest())
    with pytest.raises(SeedMismatch):
        rx.decode_step(0, msg)


def test_receiver_payload_mismatch():
    params = LinkParams()
    rx = ReceiverState(params, np.eye(2), (1, 1))
    with pytest.raises(DimensionMismatch):
        rx.decode_step(0, EncodeOutput(0, Mode.FULL_STATE, 3, payload=np.zeros(3), digest=params.digest()))


def test_receiver_warns_when_underdetermined(caplog):
    # a rank-3 history gives s_hat = 3; a header claiming p = 1 must still decode
    params = LinkParams(atoms=4, h_backward=3, h_forward=0)
    rx = ReceiverState(params, np.eye(3), (1, 1, 1))
    for k in range(3):
        rx.decode_step(k, EncodeOutput(k, Mode.FULL_STATE, 3, payload=np.eye(3)[k], digest=params.digest()))
    with caplog.at_level(logging.WARNING):
        est = rx.decode_step(3, EncodeOutput(3, Mode.COMPRESSED, 1, payload=np.array([1.0]), digest=params.digest()))
    assert "minimum-norm" in caplog.text
    assert np.all(np.isfinite(est))


def test_omp_recovery_option():
    n = 10
    params = LinkParams(atoms=10, h_backward=5, h_forward=2, recovery="omp")
    states = subspace_trajectory(n, 10, 4)
    *_, ests = run_link(params, np.eye(n), states)
    for x, e in zip(states, ests):
        assert np.linalg.norm(x - e) < 1e-6 * (1 + np.linalg.norm(x))


def test_refresh_schedule():
    p = LinkParams(h_backward=3, refresh_period=2)
    sent_full = [k for k in range(12) if k < 3 or p.is_refresh_step(k)]
    assert sent_full == [0, 1, 2, 5, 8, 11]
    assert not any(LinkParams(h_backward=3).is_refresh_step(k) for k in range(20))
