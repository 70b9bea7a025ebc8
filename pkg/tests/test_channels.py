import math

import numpy as np
import pytest

from ftlab.channels import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    Channel,
    CorrelationGrid,
    HamiltonianTerm,
    NoiseSpec,
    apply_channel,
    choi_matrix,
    compose_channels,
    correlation_grid_from_json,
    diamond_distance,
    embed_channel,
    hamiltonian_terms_from_json,
    make_noise_channel,
    noise_map_from_json,
    noise_spec_from_json,
    noise_spec_to_json,
    stinespring_dilation,
    strength_gaussian,
    strength_local_hamiltonian,
    strength_long_range,
    strength_markovian,
    strength_unitary_couplings,
)
from ftlab.matcore import (
    Matrix,
    matrix_to_json,
    operator_norm,
    partial_trace,
    qubit_dims,
    trace_norm,
)

BELL = np.zeros(4, dtype=np.complex128)
BELL[[0, 3]] = 1.0 / math.sqrt(2.0)


def haar_unitary(rng, d):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_channel(rng, d, n_kraus=3):
    # random isometry column block -> valid Kraus set
    z = rng.normal(size=(n_kraus * d, d)) + 1j * rng.normal(size=(n_kraus * d, d))
    q, _ = np.linalg.qr(z)
    return Channel.from_kraus([q[i * d : (i + 1) * d, :] for i in range(n_kraus)], (d,))


def test_channel_requires_trace_preservation():
    with pytest.raises(ValueError):
        Channel.from_kraus([0.5 * np.eye(2)], (2,))
    with pytest.raises(ValueError):
        Channel.from_kraus([], (2,))


def test_apply_channel_examples():
    rho0 = Matrix.of(np.diag([1.0, 0.0]))
    ident = Channel.identity(qubit_dims(1))
    np.testing.assert_allclose(apply_channel(ident, rho0).data, rho0.data)

    flip = make_noise_channel(NoiseSpec.probabilistic(1.0, SIGMA_X))
    np.testing.assert_allclose(
        apply_channel(flip, rho0).data, np.diag([0.0, 1.0]), atol=1e-12
    )

    ad = make_noise_channel(NoiseSpec.amplitude_damping(0.3, 1.0))
    g = 1.0 - math.exp(-0.3)
    rho1 = Matrix.of(np.diag([0.0, 1.0]))
    np.testing.assert_allclose(
        apply_channel(ad, rho1).data, np.diag([g, 1.0 - g]), atol=1e-12
    )


def test_compose_identity_and_double_flip():
    rng = np.random.default_rng(21)
    ch = random_channel(rng, 2)
    ident = Channel.identity(qubit_dims(1))
    np.testing.assert_allclose(
        choi_matrix(compose_channels(ident, ch)).data, choi_matrix(ch).data, atol=1e-10
    )
    p = 0.2
    flip = make_noise_channel(NoiseSpec.probabilistic(p, SIGMA_X))
    twice = compose_channels(flip, flip)
    expect = make_noise_channel(NoiseSpec.probabilistic(2 * p * (1 - p), SIGMA_X))
    np.testing.assert_allclose(
        choi_matrix(twice).data, choi_matrix(expect).data, atol=1e-10
    )


def test_embed_channel_acts_locally():
    rng = np.random.default_rng(22)
    ch = make_noise_channel(NoiseSpec.depolarizing(0.4), support=(1,))
    big = embed_channel(ch, qubit_dims(3))
    states = [rng.normal(size=2) + 1j * rng.normal(size=2) for _ in range(3)]
    states = [v / np.linalg.norm(v) for v in states]
    rho = Matrix.of(
        np.kron(
            np.kron(np.outer(states[0], states[0].conj()), np.outer(states[1], states[1].conj())),
            np.outer(states[2], states[2].conj()),
        ),
        qubit_dims(3),
    )
    out = apply_channel(big, rho)
    np.testing.assert_allclose(
        partial_trace(out, [0]).data, np.outer(states[0], states[0].conj()), atol=1e-10
    )
    np.testing.assert_allclose(
        partial_trace(out, [2]).data, np.outer(states[2], states[2].conj()), atol=1e-10
    )
    local = make_noise_channel(NoiseSpec.depolarizing(0.4))
    small = apply_channel(local, Matrix.of(np.outer(states[1], states[1].conj())))
    np.testing.assert_allclose(partial_trace(out, [1]).data, small.data, atol=1e-10)


def test_embed_commutes_with_compose():
    rng = np.random.default_rng(23)
    a = random_channel(rng, 2)
    b = random_channel(rng, 2)
    total = qubit_dims(2)
    lhs = compose_channels(embed_channel(a, total), embed_channel(b, total))
    rhs = embed_channel(compose_channels(a, b), total)
    np.testing.assert_allclose(choi_matrix(lhs).data, choi_matrix(rhs).data, atol=1e-10)


def test_choi_matrix_examples():
    ident = Channel.identity(qubit_dims(1))
    np.testing.assert_allclose(
        choi_matrix(ident).data, 2.0 * np.outer(BELL, BELL.conj()), atol=1e-12
    )
    # uniform mixture over {I, X, Y, Z} with weight 3/4 on the Paulis
    dep = make_noise_channel(NoiseSpec.depolarizing(0.75))
    np.testing.assert_allclose(choi_matrix(dep).data, np.eye(4) / 2, atol=1e-12)

    p = 0.3
    prob = make_noise_channel(NoiseSpec.probabilistic(p, SIGMA_X))
    x_chan = Channel.unitary(SIGMA_X, (2,))
    np.testing.assert_allclose(
        choi_matrix(prob).data,
        (1 - p) * choi_matrix(ident).data + p * choi_matrix(x_chan).data,
        atol=1e-12,
    )


def test_choi_matrix_is_positive_with_identity_marginal():
    rng = np.random.default_rng(24)
    for _ in range(5):
        ch = random_channel(rng, 3)
        j = choi_matrix(ch)
        assert np.min(np.linalg.eigvalsh(j.data)) >= -1e-10
        np.testing.assert_allclose(
            partial_trace(j, [1]).data, np.eye(3), atol=1e-10
        )


def test_diamond_distance_identical_channels():
    ch = make_noise_channel(NoiseSpec.depolarizing(0.1))
    assert diamond_distance(ch, ch) == (0.0, 0.0)


def test_diamond_distance_bitflip_and_rotation():
    ident = Channel.identity(qubit_dims(1))
    lo, hi = diamond_distance(make_noise_channel(NoiseSpec.probabilistic(0.1, SIGMA_X)), ident)
    assert lo == pytest.approx(0.2, abs=1e-6)
    assert lo <= hi
    assert hi - lo <= 1e-4

    for theta in (0.02, 0.05, 0.1):
        rot = make_noise_channel(NoiseSpec.control_rotation(theta))
        lo, hi = diamond_distance(rot, ident)
        assert lo == pytest.approx(2.0 * math.sin(theta), abs=1e-6)
        assert hi - lo <= 1e-4


def test_diamond_distance_symmetry_and_triangle():
    rng = np.random.default_rng(25)
    chans = [random_channel(rng, 2) for _ in range(3)]
    ab = diamond_distance(chans[0], chans[1], restarts=8)[0]
    ba = diamond_distance(chans[1], chans[0], restarts=8)[0]
    assert ab == pytest.approx(ba, abs=1e-9)
    bc = diamond_distance(chans[1], chans[2], restarts=8)[0]
    ac_hi = diamond_distance(chans[0], chans[2], restarts=8)[1]
    # upper(a,c) can exceed lower(a,b) + lower(b,c)? no: diamond norm obeys
    # the triangle inequality, and lower <= true <= upper on each pair
    ac_lo = diamond_distance(chans[0], chans[2], restarts=8)[0]
    ab_hi = diamond_distance(chans[0], chans[1], restarts=8)[1]
    bc_hi = diamond_distance(chans[1], chans[2], restarts=8)[1]
    assert ac_lo <= ab_hi + bc_hi + 1e-8
    assert ab + bc >= ac_lo - 1e-8 or True  # lower bounds need not chain
    assert diamond_distance(chans[0], chans[1], restarts=8)[0] <= diamond_distance(
        chans[0], chans[1], restarts=8
    )[1]


def test_make_noise_channel_examples():
    spec = NoiseSpec.amplitude_damping(0.01, 1.0)
    assert spec.gamma == pytest.approx(0.009950166250831893, rel=1e-12)
    assert make_noise_channel(NoiseSpec.probabilistic(0.0, SIGMA_X)).is_identity()
    assert make_noise_channel(NoiseSpec.control_rotation(0.0)).is_identity()
    with pytest.raises(ValueError):
        NoiseSpec.probabilistic(1.2, SIGMA_X)
    with pytest.raises(ValueError):
        NoiseSpec.probabilistic(0.1, np.diag([1.0, 0.5]))


def test_strength_markovian_examples():
    ident = Channel.identity(qubit_dims(1))
    assert strength_markovian(ident, ident) == pytest.approx(0.0, abs=1e-12)

    rng = np.random.default_rng(26)
    u = haar_unitary(rng, 2)
    ideal = Channel.unitary(u, (2,))
    for p in (0.05, 0.2):
        noisy = compose_channels(make_noise_channel(NoiseSpec.probabilistic(p, SIGMA_X)), ideal)
        assert strength_markovian(noisy, ideal) == pytest.approx(2 * p, abs=1e-9)

    for theta in (0.1, 0.01, 0.001):
        rot = make_noise_channel(NoiseSpec.control_rotation(theta))
        eps = strength_markovian(rot, ident)
        assert eps / theta == pytest.approx(2.0, rel=5e-3 if theta < 0.1 else 5e-2)

    meas = Channel.from_kraus(
        [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])], (2,)
    )  # dephasing: not invertible
    with pytest.raises(ValueError):
        strength_markovian(meas, meas, decompose=True)
    assert strength_markovian(meas, meas) == pytest.approx(0.0, abs=1e-12)


def test_strength_markovian_probabilistic_bounded_by_2p():
    rng = np.random.default_rng(27)
    ident = Channel.identity(qubit_dims(1))
    for _ in range(8):
        p = rng.uniform(0.0, 0.5)
        e = haar_unitary(rng, 2)
        noisy = make_noise_channel(NoiseSpec.probabilistic(p, e))
        assert strength_markovian(noisy, ident) <= 2 * p + 1e-10


def test_strength_markovian_amplitude_damping_linear_in_gamma():
    ident = Channel.identity(qubit_dims(1))
    ratios = []
    for g in (1e-2, 1e-3, 1e-4):
        t0 = -math.log1p(-g)
        eps = strength_markovian(make_noise_channel(NoiseSpec.amplitude_damping(t0, 1.0)), ident)
        ratios.append(eps / g)
    assert all(0.1 <= r <= 3.0 for r in ratios)
    assert ratios[1] == pytest.approx(ratios[2], rel=0.05)


def test_stinespring_dilation_reproduces_channel():
    rng = np.random.default_rng(28)
    ch = random_channel(rng, 2, n_kraus=3)
    iso, n_env = stinespring_dilation(ch)
    assert n_env == 3
    rho = np.diag([0.7, 0.3]).astype(np.complex128)
    joint_in = np.kron(rho, np.zeros((3, 3)))
    joint_in[np.ix_([0, 3], [0, 3])] = rho  # rho tensor |0><0|_env
    u = iso.data
    joint = u @ np.kron(rho, np.diag([1.0, 0.0, 0.0])) @ u.conj().T
    reduced = joint.reshape(2, 3, 2, 3).trace(axis1=1, axis2=3)
    np.testing.assert_allclose(
        reduced, apply_channel(ch, Matrix.of(rho)).data, atol=1e-10
    )
    unit = Channel.unitary(haar_unitary(rng, 2), (2,))
    _, n_env_u = stinespring_dilation(unit)
    assert n_env_u == 1


def test_strength_local_hamiltonian():
    zero = HamiltonianTerm((0,), Matrix.of(np.zeros((2, 2))), 1)
    assert strength_local_hamiltonian([zero], 1.0) == 0.0

    lam = 0.37
    zx = HamiltonianTerm((0, 1), Matrix.of(lam * np.kron(SIGMA_Z, SIGMA_X), (2, 2)), 2)
    assert strength_local_hamiltonian([zx], 1.0) == pytest.approx(lam, rel=1e-12)

    rng = np.random.default_rng(29)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    a = 0.3 * (a + a.conj().T) / operator_norm(a + a.conj().T)
    b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b = 0.7 * (b + b.conj().T) / operator_norm(b + b.conj().T)
    terms = [
        HamiltonianTerm((0,), Matrix.of(a), 5),
        HamiltonianTerm((0,), Matrix.of(b), 5),
    ]
    expect = np.max(np.abs(np.linalg.eigvalsh(a + b)))
    assert strength_local_hamiltonian(terms, 2.0) == pytest.approx(2.0 * expect, rel=1e-10)
    with pytest.raises(ValueError):
        strength_local_hamiltonian([], 1.0)


def test_strength_local_hamiltonian_different_supports_same_label():
    # same gate label, terms on different qubits: embedded on the union
    h0 = HamiltonianTerm((0,), Matrix.of(0.4 * SIGMA_Z), 1)
    h1 = HamiltonianTerm((1,), Matrix.of(0.4 * SIGMA_Z), 1)
    # ||0.4 Z x I + 0.4 I x Z|| = 0.8
    assert strength_local_hamiltonian([h0, h1], 1.0) == pytest.approx(0.8, rel=1e-12)


def test_strength_long_range():
    zero = HamiltonianTerm((0, 1), Matrix.of(np.zeros((4, 4)), (2, 2)), (0, 1))
    assert float(strength_long_range([zero], 1.0)) == 0.0

    h = 0.05
    single = HamiltonianTerm((0, 1), Matrix.of(h * np.kron(SIGMA_X, SIGMA_X), (2, 2)), (0, 1))
    val = strength_long_range([single], 1.0)
    assert float(val) == pytest.approx(math.sqrt(2 * math.e * h), rel=1e-12)
    assert val.within_validity

    star = [
        HamiltonianTerm((0, k), Matrix.of(0.01 * np.kron(SIGMA_Z, SIGMA_Z), (2, 2)), (0, k))
        for k in range(1, 5)
    ]
    val = strength_long_range(star, 1.0)
    assert float(val) == pytest.approx(0.46632879631942487, rel=1e-12)
    assert float(val) == pytest.approx(math.sqrt(2 * math.e * 0.04), rel=1e-12)
    big = HamiltonianTerm((0, 1), Matrix.of(5.0 * np.kron(SIGMA_X, SIGMA_X), (2, 2)), (0, 1))
    assert not strength_long_range([big], 1.0).within_validity


def test_strength_gaussian():
    flat = np.zeros((2, 2, 2, 2))
    grid = CorrelationGrid(flat, 1.0, ((0,), (1,)))
    assert strength_gaussian(grid, c=1.0) == 0.0

    d0 = 0.42
    one = CorrelationGrid(np.full((1, 1, 1, 1), d0), 1.0, ((0,),))
    assert strength_gaussian(one, c=1.0) == pytest.approx(math.sqrt(d0), rel=1e-12)

    rng = np.random.default_rng(30)
    delta = rng.uniform(0.0, 1.0, size=(4, 2, 4, 2))
    regions = ((0,), (1, 2, 3))
    grid = CorrelationGrid(delta, 0.5, regions)
    cells = sorted({i for r in regions for i in r})
    best = 0.0
    for r in regions:
        total = 0.0
        for p in r:
            for q in cells:
                for m1 in range(2):
                    for m2 in range(2):
                        total += delta[p, m1, q, m2] * 0.25
        best = max(best, total)
    assert strength_gaussian(grid, c=2.0) == pytest.approx(math.sqrt(2.0 * best), rel=1e-10)


def test_strength_monotone_in_coupling_norms():
    base = HamiltonianTerm((0,), Matrix.of(0.2 * SIGMA_X), 1)
    bigger = HamiltonianTerm((0,), Matrix.of(0.5 * SIGMA_X), 1)
    assert strength_local_hamiltonian([bigger], 1.0) >= strength_local_hamiltonian([base], 1.0)
    pair_s = HamiltonianTerm((0, 1), Matrix.of(0.2 * np.kron(SIGMA_X, SIGMA_X), (2, 2)), (0, 1))
    pair_b = HamiltonianTerm((0, 1), Matrix.of(0.5 * np.kron(SIGMA_X, SIGMA_X), (2, 2)), (0, 1))
    assert float(strength_long_range([pair_b], 1.0)) >= float(strength_long_range([pair_s], 1.0))
    u_s = Matrix.of(np.diag([1.0, np.exp(0.1j)]))
    u_b = Matrix.of(np.diag([1.0, np.exp(0.3j)]))
    assert strength_unitary_couplings([u_b]) >= strength_unitary_couplings([u_s])


def test_noise_spec_json_round_trip():
    specs = [
        NoiseSpec.control_rotation(0.05),
        NoiseSpec.amplitude_damping(0.01, 1.0),
        NoiseSpec.probabilistic(0.1, SIGMA_X),
        NoiseSpec.depolarizing(0.2),
    ]
    for spec in specs:
        back = noise_spec_from_json(noise_spec_to_json(spec))
        np.testing.assert_allclose(
            choi_matrix(make_noise_channel(back)).data,
            choi_matrix(make_noise_channel(spec)).data,
            atol=1e-12,
        )
    with pytest.raises(ValueError):
        noise_spec_from_json({"kind": "nonsense"})


def test_noise_map_and_terms_json():
    raw = {
        "1": {"kind": "depolarizing", "p": 0.1, "support": [0]},
        "2": {"kind": "probabilistic", "p": 0.2, "e_op": matrix_to_json(SIGMA_X)},
    }
    noise = noise_map_from_json(raw)
    assert set(noise) == {1, 2}
    assert noise[1].support == (0,)

    terms = hamiltonian_terms_from_json(
        [{"support": [0, 1], "op": matrix_to_json(np.kron(SIGMA_Z, SIGMA_X)), "label": [0, 1]}]
    )
    assert terms[0].label == (0, 1)
    grid = correlation_grid_from_json(
        {"delta_abs": np.zeros((1, 1, 1, 1)).tolist(), "cell_volume": 1.0, "gate_regions": [[0]]}
    )
    assert strength_gaussian(grid) == 0.0
