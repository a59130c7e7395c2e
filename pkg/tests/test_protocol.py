import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stinespring.hilbert import DensityMatrix, LayoutError, RegisterLayout, partial_trace
from stinespring.protocol import (
    GATES,
    Condition,
    CondMeasure,
    Feedback,
    Measure,
    ProtocolSpec,
    Unitary,
    compiled_unitary,
    marginal_given,
    matrix_from_json,
    run_dilated,
    sample_outcomes,
    sample_trajectory,
    born_from_dilated,
)
from stinespring.spectral import spectral_decompose

Q = RegisterLayout.of(("q", 2))
QQ = RegisterLayout.of(("a", 2), ("b", 2))
PLUS = np.array([1, 1]) / np.sqrt(2)


def reset_protocol():
    return ProtocolSpec(Q, (Measure(GATES["Z"], ("q",), "M"), Feedback(Condition.outcome("M", 1), GATES["X"], ("q",))))


class TestValidation:
    def test_unknown_target(self):
        with pytest.raises(LayoutError):
            ProtocolSpec(Q, (Unitary(GATES["X"], ("r",)),))

    def test_shape_mismatch(self):
        with pytest.raises(LayoutError):
            ProtocolSpec(Q, (Unitary(GATES["CNOT"], ("q",)),))

    def test_non_unitary_gate(self):
        with pytest.raises(ValueError):
            ProtocolSpec(Q, (Unitary(np.diag([1.0, 0.5]), ("q",)),))

    def test_condition_must_follow_measurement(self):
        with pytest.raises(ValueError):
            ProtocolSpec(Q, (Feedback(Condition.outcome("M", 1), GATES["X"], ("q",)), Measure(GATES["Z"], ("q",), "M")))

    def test_duplicate_outcome_label(self):
        with pytest.raises(LayoutError):
            ProtocolSpec(Q, (Measure(GATES["Z"], ("q",), "M"), Measure(GATES["X"], ("q",), "M")))
        with pytest.raises(LayoutError):
            ProtocolSpec(Q, (Measure(GATES["Z"], ("q",), "q"),))

    def test_empty_condition(self):
        with pytest.raises(ValueError):
            Condition()

    def test_layout_appends_outcome_registers(self):
        spec = ProtocolSpec(QQ, (Measure(np.diag([0.0, 1, 2, 3]), ("a", "b"), "M"), Measure(GATES["X"], ("b",), "N")))
        assert spec.layout.labels == ("a", "b", "M", "N")
        assert spec.layout.dims == (2, 2, 4, 2)
        assert spec.ss_labels == ("M", "N")


class TestCompilation:
    def test_single_z_measurement_is_cnot(self):
        spec = ProtocolSpec(Q, (Measure(GATES["Z"], ("q",), "M"),))
        np.testing.assert_allclose(compiled_unitary(spec).data, GATES["CNOT"])

    def test_feedback_is_controlled_gate(self):
        W = compiled_unitary(reset_protocol()).data
        # Feedback on M = 1 is a CNOT from M onto q, applied after the measurement CNOT
        swap = GATES["SWAP"]
        np.testing.assert_allclose(W, swap @ GATES["CNOT"] @ swap @ GATES["CNOT"], atol=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_compiled_protocol_is_unitary(self, seed):
        rng = np.random.default_rng(seed)
        h = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        obs = h + h.conj().T
        spec = ProtocolSpec(
            QQ,
            (
                Unitary(GATES["H"], ("a",)),
                Measure(obs, ("a", "b"), "M"),
                Feedback(Condition(any_of=({"M": 1}, {"M": 3})), GATES["CNOT"], ("b", "a")),
                CondMeasure(Condition.outcome("M", 0), GATES["X"], ("b",), "N"),
            ),
        )
        assert compiled_unitary(spec).is_unitary()

    def test_from_dict_matches_direct_construction(self):
        doc = {
            "registers": [{"label": "q", "dim": 2}],
            "instructions": [
                {"type": "measure", "observable": "Z", "targets": ["q"], "ss_label": "M"},
                {"type": "feedback", "gate": "X", "targets": ["q"], "condition": {"any_of": [{"M": 1}]}},
            ],
        }
        np.testing.assert_array_equal(compiled_unitary(ProtocolSpec.from_dict(doc)).data, compiled_unitary(reset_protocol()).data)

    def test_matrix_from_json_forms(self):
        np.testing.assert_array_equal(matrix_from_json(["X", "Z"]), np.kron(GATES["X"], GATES["Z"]))
        np.testing.assert_array_equal(matrix_from_json({"re": [[1, 0], [0, 1]], "im": [[0, 1], [-1, 0]]}), [[1, 1j], [-1j, 1]])
        with pytest.raises(ValueError):
            matrix_from_json("nope")


class TestDilatedRun:
    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_born_rule_from_outcome_register(self, seed):
        rng = np.random.default_rng(seed)
        h = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        obs = np.round(h + h.conj().T)
        g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        rho = g @ g.conj().T
        rho /= np.trace(rho)
        spec = ProtocolSpec(QQ, (Measure(obs, ("a", "b"), "M"),))
        run = run_dilated(spec, rho)
        sd = spectral_decompose(obs)
        for m, P in enumerate(sd.projectors):
            assert born_from_dilated(run, "M", m) == pytest.approx(np.trace(P @ rho).real, abs=1e-12)

    def test_reset_protocol_leaves_ground_state(self):
        run = run_dilated(reset_protocol(), PLUS)
        for m in (0, 1):
            p, rho = marginal_given(run, {"M": m})
            assert p == pytest.approx(0.5)
            np.testing.assert_allclose(rho.data, np.diag([1, 0]), atol=1e-14)
        np.testing.assert_allclose(partial_trace(run.final_state, ["q"]).data, np.diag([1, 0]), atol=1e-14)

    def test_impossible_outcome_has_no_state(self):
        run = run_dilated(ProtocolSpec(Q, (Measure(GATES["Z"], ("q",), "M"),)), np.array([1.0, 0.0]))
        p, rho = marginal_given(run, {"M": 1})
        assert p == 0 and rho is None
        with pytest.raises(LayoutError):
            marginal_given(run, {"q": 0})

    def test_sequential_noncommuting_measurements(self):
        spec = ProtocolSpec(Q, (Measure(GATES["Z"], ("q",), "A"), Measure(GATES["X"], ("q",), "B")))
        joint = run_dilated(spec, np.array([1.0, 0.0])).joint_outcomes()
        assert joint[(0, 0)] == pytest.approx(0.5)
        assert joint[(0, 1)] == pytest.approx(0.5)
        assert joint[(1, 0)] == pytest.approx(0) and joint[(1, 1)] == pytest.approx(0)

    def test_density_and_ket_inputs_agree(self):
        spec = ProtocolSpec(Q, (Unitary(GATES["H"], ("q",)), Measure(GATES["Y"], ("q",), "M")))
        psi = np.array([0.6, 0.8j])
        a = run_dilated(spec, psi).final_state.data
        b = run_dilated(spec, DensityMatrix(Q, np.outer(psi, psi.conj()))).final_state.data
        np.testing.assert_allclose(a, b, atol=1e-14)


class TestTrajectories:
    def test_seed_reproducible_and_shot_independent(self):
        spec = ProtocolSpec(Q, (Measure(GATES["X"], ("q",), "M"),))
        a = sample_outcomes(spec, np.array([1.0, 0.0]), seed=5, shots=50)
        b = sample_outcomes(spec, np.array([1.0, 0.0]), seed=5, shots=50)
        np.testing.assert_array_equal(a, b)
        assert sample_trajectory(spec, np.array([1.0, 0.0]), 5, shot=17).outcomes["M"] == a[17, 0]

    def test_unfired_conditional_measurement_reports_zero(self):
        spec = ProtocolSpec(
            Q, (Measure(GATES["Z"], ("q",), "A"), CondMeasure(Condition.outcome("A", 1), GATES["X"], ("q",), "B"))
        )
        tr = sample_trajectory(spec, np.array([1.0, 0.0]), seed=0)
        assert tr.outcomes == {"A": 0, "B": 0}
        assert tr.measured == {"A": True, "B": False}

    def test_reset_trajectories_end_in_ground_state(self):
        spec = reset_protocol()
        for shot in range(20):
            tr = sample_trajectory(spec, PLUS, seed=1, shot=shot)
            assert abs(tr.state.data[0]) == pytest.approx(1.0)

    def test_frequencies_match_dilated_marginals(self):
        theta = 0.7
        spec = ProtocolSpec(Q, (Unitary(GATES["H"], ("q",)), Measure(GATES["Z"], ("q",), "M")))
        psi = np.array([np.cos(theta), np.sin(theta)])
        p_exact = run_dilated(spec, psi).outcome_marginals["M"]
        shots = 4000
        freq = np.bincount(sample_outcomes(spec, psi, seed=3, shots=shots)[:, 0], minlength=2) / shots
        sigma = np.sqrt(p_exact[0] * p_exact[1] / shots)
        assert abs(freq[0] - p_exact[0]) < 5 * sigma
