import itertools

import numpy as np
import pytest
import torch

from rrseg.labelers.crf import LinearChainCRF, crf_decode, crf_nll


def brute_scores(crf: LinearChainCRF, emissions: torch.Tensor):
    """Score of every labeling, in lexicographic path order."""
    n, k = emissions.shape
    paths = list(itertools.product(range(k), repeat=n))
    scores = []
    for path in paths:
        s = crf.start[path[0]] + emissions[0, path[0]] + crf.end[path[-1]]
        for t in range(1, n):
            s = s + crf.transitions[path[t - 1], path[t]] + emissions[t, path[t]]
        scores.append(s)
    return paths, torch.stack(scores)


@pytest.fixture()
def crf3():
    torch.manual_seed(0)
    crf = LinearChainCRF(3, init_scale=0.5)
    return crf


def test_log_partition_matches_brute_force(crf3):
    for seed in range(5):
        g = torch.Generator().manual_seed(seed)
        emissions = torch.randn(4, 3, generator=g)
        _, scores = brute_scores(crf3, emissions)
        expected = torch.logsumexp(scores, dim=0)
        assert torch.allclose(crf3.log_partition(emissions), expected, atol=1e-6)


def test_path_probabilities_sum_to_one(crf3):
    emissions = torch.randn(3, 3, generator=torch.Generator().manual_seed(1))
    paths, _ = brute_scores(crf3, emissions)
    total = 0.0
    for path in paths:
        nll = crf3.nll(emissions, torch.tensor(path))
        total += float(torch.exp(-nll))
    assert total == pytest.approx(1.0, abs=1e-6)


def test_decode_matches_brute_argmax(crf3):
    for seed in range(5):
        g = torch.Generator().manual_seed(100 + seed)
        emissions = torch.randn(5, 3, generator=g)
        paths, scores = brute_scores(crf3, emissions)
        best = paths[int(torch.argmax(scores))]
        mask = torch.ones(1, 5, dtype=torch.bool)
        decoded = crf3.decode_batch(emissions.unsqueeze(0), mask)[0]
        assert tuple(decoded) == best


def test_decode_tie_breaks_to_lowest_label():
    crf = LinearChainCRF(3, init_scale=0.0)  # all-zero parameters
    emissions = torch.zeros(4, 3)
    mask = torch.ones(1, 4, dtype=torch.bool)
    assert crf.decode_batch(emissions.unsqueeze(0), mask)[0] == [0, 0, 0, 0]


def test_batch_nll_matches_per_sequence(crf3):
    g = torch.Generator().manual_seed(2)
    e1 = torch.randn(5, 3, generator=g)
    e2 = torch.randn(2, 3, generator=g)
    t1 = torch.tensor([0, 2, 1, 1, 0])
    t2 = torch.tensor([1, 0])
    emissions = torch.zeros(2, 5, 3)
    emissions[0] = e1
    emissions[1, :2] = e2
    tags = torch.zeros(2, 5, dtype=torch.int64)
    tags[0] = t1
    tags[1, :2] = t2
    mask = torch.zeros(2, 5, dtype=torch.bool)
    mask[0] = True
    mask[1, :2] = True
    batch = crf3.batch_nll(emissions, tags, mask)
    assert torch.allclose(batch[0], crf3.nll(e1, t1), atol=1e-6)
    assert torch.allclose(batch[1], crf3.nll(e2, t2), atol=1e-6)


def test_decode_batch_ignores_padding(crf3):
    g = torch.Generator().manual_seed(3)
    e = torch.randn(3, 3, generator=g)
    single = crf3.decode_batch(e.unsqueeze(0), torch.ones(1, 3, dtype=torch.bool))[0]
    padded = torch.zeros(1, 6, 3)
    padded[0, :3] = e
    padded[0, 3:] = 99.0  # garbage beyond the mask
    mask = torch.zeros(1, 6, dtype=torch.bool)
    mask[0, :3] = True
    assert crf3.decode_batch(padded, mask)[0] == single


def test_marginals_match_brute_force(crf3):
    emissions = torch.randn(4, 3, generator=torch.Generator().manual_seed(4))
    paths, scores = brute_scores(crf3, emissions)
    probs = torch.softmax(scores, dim=0)
    expected = np.zeros((4, 3))
    for path, p in zip(paths, probs):
        for t, lab in enumerate(path):
            expected[t, lab] += float(p)
    got = crf3.marginals(emissions).detach().numpy()
    np.testing.assert_allclose(got, expected, atol=1e-6)
    np.testing.assert_allclose(got.sum(axis=1), np.ones(4), atol=1e-6)


def test_input_validation(crf3):
    bad = torch.full((2, 3), float("nan"))
    with pytest.raises(Exception):
        crf3.nll(bad, torch.tensor([0, 1]))
    emissions = torch.zeros(1, 3, 3)
    tags = torch.zeros(1, 3, dtype=torch.int64)
    mask = torch.zeros(1, 3, dtype=torch.bool)  # first position masked out
    with pytest.raises(ValueError, match="mask"):
        crf3.batch_nll(emissions, tags, mask)
    with pytest.raises(ValueError):
        LinearChainCRF(0)


def test_convenience_wrappers(crf3):
    emissions = torch.randn(3, 3, generator=torch.Generator().manual_seed(5))
    tags = [0, 1, 2]
    assert crf_nll(emissions, tags, crf3) == pytest.approx(
        float(crf3.nll(emissions, torch.tensor(tags)))
    )
    assert crf_decode(emissions, crf3) == crf3.decode_batch(
        emissions.unsqueeze(0), torch.ones(1, 3, dtype=torch.bool)
    )[0]
