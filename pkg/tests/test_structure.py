import numpy as np
import pytest

from posmu import (
    BlockSpec,
    InputError,
    StructuredPerturbation,
    block_norm,
    disassemble,
    dyad_interpolant,
    lift_witness,
    nonnegative_witness,
    reduce_structure,
    sample_boundary,
    validate_structure,
)

import support


def test_canonical_order_puts_full_blocks_first():
    s = validate_structure([
        BlockSpec(kind="scalar", size=2, field="complex"),
        BlockSpec(kind="full", size=3, field="real"),
        BlockSpec(kind="scalar", size=1, field="real"),
        BlockSpec(kind="full", size=1, field="complex"),
    ])
    assert [b.kind for b in s.blocks] == ["full", "full", "scalar", "scalar"]
    assert s.total_dim == 7
    assert s.is_permuted
    # block_order maps canonical slots to the original block indices
    assert [s.block_order[i] for i in range(4)] == [1, 3, 0, 2]


def test_permute_matrix_moves_entries_consistently():
    r = support.rng(3)
    s = support.random_structure(r, 6)
    m = r.random((6, 6))
    mc = s.permute_matrix(m)
    p = np.asarray(s.permutation)
    assert np.array_equal(mc, m[np.ix_(p, p)])


def test_validate_structure_rejects_bad_blocks():
    with pytest.raises(InputError):
        validate_structure([])
    with pytest.raises(InputError):
        validate_structure([BlockSpec(kind="full", size=0, field="real")])
    with pytest.raises(InputError):
        validate_structure([BlockSpec(kind="diag", size=1, field="real")])
    with pytest.raises(InputError):
        validate_structure([BlockSpec(kind="full", size=1, field="rational")])


def test_reduction_splits_repeated_scalars():
    s = validate_structure([
        BlockSpec(kind="full", size=2, field="complex"),
        BlockSpec(kind="scalar", size=3, field="real"),
    ])
    red = reduce_structure(s)
    assert red.sizes == (2, 1, 1, 1)
    assert red.origin_map == (0, 1, 1, 1)
    assert red.total_dim == 5


def test_perturbation_validation():
    s = validate_structure([
        BlockSpec(kind="full", size=2, field="real"),
        BlockSpec(kind="scalar", size=2, field="real"),
    ])
    good = StructuredPerturbation(structure=s, blocks=(np.eye(2), 0.5 * np.eye(2)))
    assert good.norm() == pytest.approx(1.0)
    with pytest.raises(InputError):
        StructuredPerturbation(structure=s, blocks=(np.eye(3), 0.5 * np.eye(2)))
    with pytest.raises(InputError):  # complex entries in a real block
        StructuredPerturbation(structure=s, blocks=(1j * np.eye(2), 0.5 * np.eye(2)))
    with pytest.raises(InputError):  # repeated scalar block must be delta * I
        StructuredPerturbation(
            structure=s, blocks=(np.eye(2), np.array([[0.5, 0.0], [0.0, 0.2]]))
        )


def test_assemble_disassemble_roundtrip():
    r = support.rng(11)
    for _ in range(20):
        s = support.random_structure(r, 5)
        d = sample_boundary(s, r)
        full = d.assemble()
        assert full.shape == (5, 5)
        d2 = disassemble(full, s)
        assert np.allclose(d2.assemble(), full)
        assert block_norm(d) == pytest.approx(1.0, abs=1e-12)


def test_dyad_interpolant_maps_p_to_q():
    r = support.rng(7)
    for _ in range(50):
        n = int(r.integers(1, 8))
        p = r.random(n) + 0.1
        q = r.random(n)
        q *= 0.9 * np.linalg.norm(p) / max(np.linalg.norm(q), 1e-30)
        d = dyad_interpolant(p, q)
        assert np.linalg.norm(d @ p - q) <= 1e-12 * (1 + np.linalg.norm(q))
        assert np.linalg.svd(d, compute_uv=False)[0] <= 1.0 + 1e-12


def test_dyad_interpolant_rejects_expanding_pairs():
    with pytest.raises(InputError):
        dyad_interpolant([1.0, 0.0], [2.0, 0.0])
    with pytest.raises(InputError):
        dyad_interpolant([0.0, 0.0], [0.0, 0.0])
    with pytest.raises(InputError):
        dyad_interpolant([1.0, -0.5], [0.5, 0.0])


def test_nonnegative_witness_marginal_fixed_point():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    red = reduce_structure(validate_structure([
        BlockSpec(kind="full", size=1, field="real"),
        BlockSpec(kind="full", size=1, field="real"),
    ]))
    d = StructuredPerturbation(
        structure=red, blocks=(np.array([[-1.0]]), np.array([[1.0]]))
    )
    d_tilde, q = nonnegative_witness(m, d)
    lam = float(np.max(np.abs(np.linalg.eigvals(m))))  # moduli give M itself
    assert np.allclose(d_tilde.assemble(), np.eye(2) / lam)
    # q is the Perron direction of M d_tilde with eigenvalue one
    assert np.allclose(m @ d_tilde.assemble() @ q, q, atol=1e-9)
    assert np.all(q >= 0) and np.linalg.norm(q) == pytest.approx(1.0)


def test_nonnegative_witness_rejects_subcritical_input():
    m = np.array([[0.1, 0.0], [0.0, 0.1]])
    red = reduce_structure(validate_structure([
        BlockSpec(kind="full", size=1, field="real"),
        BlockSpec(kind="full", size=1, field="real"),
    ]))
    d = StructuredPerturbation(
        structure=red, blocks=(np.array([[1.0]]), np.array([[1.0]]))
    )
    with pytest.raises(InputError):
        nonnegative_witness(m, d)


def test_lift_witness_collapses_scalar_groups():
    s = validate_structure([
        BlockSpec(kind="full", size=1, field="real"),
        BlockSpec(kind="scalar", size=2, field="complex"),
    ])
    red = reduce_structure(s)
    d = StructuredPerturbation(
        structure=red,
        blocks=(np.array([[0.5]]), np.array([[0.3]]), np.array([[-0.9]])),
    )
    lifted = lift_witness(s, d)
    assert lifted.structure is s
    assert np.allclose(lifted.blocks[0], [[0.5]])
    assert np.allclose(lifted.blocks[1], 0.9 * np.eye(2))


def test_lift_witness_rejects_mismatched_reduction():
    s = validate_structure([BlockSpec(kind="scalar", size=2, field="real")])
    other = reduce_structure(validate_structure([BlockSpec(kind="full", size=2, field="real")]))
    d = StructuredPerturbation(structure=other, blocks=(np.eye(2),))
    with pytest.raises(InputError):
        lift_witness(s, d)


def test_sample_boundary_modes():
    r = support.rng(23)
    s = validate_structure([
        BlockSpec(kind="full", size=2, field="complex"),
        BlockSpec(kind="scalar", size=2, field="complex"),
    ])
    saw_complex = False
    for _ in range(30):
        d_nn = sample_boundary(s, r, mode="nonneg")
        full = d_nn.assemble()
        assert np.all(full.real >= 0) and np.all(full.imag == 0)
        assert block_norm(d_nn) == pytest.approx(1.0, abs=1e-12)
        d_mx = sample_boundary(s, r, mode="mixed")
        saw_complex = saw_complex or np.any(np.iscomplex(d_mx.assemble()))
        assert block_norm(d_mx) == pytest.approx(1.0, abs=1e-12)
    assert saw_complex
    with pytest.raises(InputError):
        sample_boundary(s, r, mode="uniform")
