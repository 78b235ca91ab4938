import numpy as np
import pytest

from clothstate.errors import BadFoldLine, InvalidPolygon, OpenChain, TooSparse
from clothstate.geometry import BorderCurve, signed_side
from clothstate.synth import (
    SHAPES,
    ClothShape,
    DatasetEntry,
    FoldSample,
    FoldSpec,
    _nearest_neighbour_chain,
    add_noise,
    apply_fold,
    build_shape,
    epsilon_cover,
    extract_silhouette_border,
    generate_dataset,
    load_dataset,
    random_fold,
    sample_seeds,
    sample_surface,
    save_dataset,
)

TWO_PI = 2 * np.pi


def folded_corners_by_arc(sample):
    g1, g2 = sample.gt_fold
    total = sample.start.arc_length()
    cum = sample.start.cumulative_arc_length()
    span = np.mod(g2 - g1, TWO_PI)
    return sorted(c for c in sample.corners
                  if 0 < np.mod(TWO_PI * cum[c] / total - g1, TWO_PI) < span)


def test_square_corners():
    border, corners = build_shape("square", 40)
    assert border.n == 40 and corners == [0, 10, 20, 30]
    assert np.allclose(border.segment_lengths(), border.segment_lengths()[0])


def test_tshirt_and_circle():
    assert len(build_shape("tshirt", 80)[1]) == 8
    assert build_shape("circle", 64)[1] == []
    for name in SHAPES:
        border, corners = build_shape(name, 80)
        assert np.linalg.norm(border.vertices, axis=1).max() == pytest.approx(1.0)
        if corners:
            # every polygon corner is a border vertex
            assert len(corners) == len(SHAPES[name])


def test_invalid_shapes():
    with pytest.raises(InvalidPolygon):
        ClothShape("hat")
    with pytest.raises(InvalidPolygon):
        ClothShape("square", np.array([[0, 0], [1, 1], [1, 0], [0, 1]]))
    with pytest.raises(InvalidPolygon):
        build_shape("square", 4)


def test_midline_fold():
    border, corners = build_shape("square", 40)
    s = apply_fold(border, FoldSpec((0.0, 0.0), (0.0, 1.0), "left"), corners)
    assert s.gt_folded_corners == [0, 30]
    moved = s.end.vertices[:, 2] > 0
    # the folded half lands on its mirror image in the stationary half
    xy = s.end.vertices[:, :2]
    d = np.linalg.norm(xy[moved][:, None] - xy[~moved][None], axis=2).min(axis=1)
    assert d.max() < 1e-12
    assert np.all(xy[:, 0] >= -1e-12)
    assert np.allclose(s.end.vertices[moved, 2], 0.02)
    assert np.array_equal(s.end.vertices[~moved], border.vertices[~moved])


def test_diagonal_fold_angles():
    border, corners = build_shape("square", 40)
    s = apply_fold(border, FoldSpec((0.0, 0.0), (1.0, 1.0), "right"), corners)
    assert sorted(s.gt_fold) == pytest.approx([0.0, np.pi], abs=1e-12)
    assert s.gt_folded_corners == [10]


def test_gt_fold_order_matches_folded_corners():
    samples = generate_dataset(["square", "tshirt", "trousers", "rectangle"], 24, 9)
    for s in samples:
        assert folded_corners_by_arc(s) == s.gt_folded_corners


def test_fold_line_errors():
    border, _ = build_shape("square", 40)
    with pytest.raises(BadFoldLine):
        apply_fold(border, FoldSpec((5.0, 0.0), (0.0, 1.0)))
    with pytest.raises(BadFoldLine):
        FoldSpec((0, 0), (0, 0))
    with pytest.raises(ValueError):
        FoldSpec((0, 0), (0, 1), side="up")


def test_fold_on_edge_raises():
    border, _ = build_shape("square", 40)
    x = border.vertices[0, 0]
    with pytest.raises(BadFoldLine):
        apply_fold(border, FoldSpec((x, 0.0), (0.0, 1.0)))


def test_noise():
    border, _ = build_shape("square", 80)
    assert add_noise(border, 0.0, 1) is border
    a = add_noise(border, 0.01, 7, renormalize=False)
    assert np.array_equal(a.vertices, add_noise(border, 0.01, 7, renormalize=False).vertices)
    rmse = np.sqrt(np.mean(np.sum((a.vertices - border.vertices) ** 2, axis=1)))
    assert rmse == pytest.approx(0.01 * np.sqrt(3), rel=0.2)
    with pytest.raises(ValueError):
        add_noise(border, -1, 0)


def test_epsilon_cover():
    pts = np.zeros((5, 2)) + np.linspace(0, 0.01, 5)[:, None]
    assert np.array_equal(epsilon_cover(pts, 0.1), pts[:1])
    line = np.column_stack([np.arange(6) * 0.15, np.zeros(6)])
    assert len(epsilon_cover(line, 0.1)) == 6
    rng = np.random.default_rng(0)
    cloud = rng.uniform(0, 1, (1000, 2))
    centres = epsilon_cover(cloud, 0.04)
    d = np.linalg.norm(cloud[:, None] - centres[None], axis=2).min(axis=1)
    assert d.max() <= 0.04


def test_silhouette_of_square():
    border, _ = build_shape("square", 40)
    pts = sample_surface(border, density=60)
    out = extract_silhouette_border(pts, grid_res=64)
    tol = 2 * 2 * np.sqrt(0.5) / 64 * 2
    for corner in border.vertices[[0, 10, 20, 30], :2]:
        assert np.linalg.norm(out.vertices[:, :2] - corner, axis=1).min() < tol
    x, y = out.vertices[:, 0], out.vertices[:, 1]
    assert np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0


def test_silhouette_keeps_largest_patch():
    border, _ = build_shape("square", 40)
    big = sample_surface(border, density=50)
    small = big[::7] * 0.2 + np.array([3.0, 3.0, 0.0])
    out = extract_silhouette_border(np.vstack([big, small]), grid_res=96)
    assert out.vertices[:, 0].max() < 1.5


def test_silhouette_errors():
    with pytest.raises(TooSparse):
        extract_silhouette_border(np.zeros((50, 3)))
    with pytest.raises(OpenChain):
        _nearest_neighbour_chain(np.array([[0.0, 0], [0.1, 0], [5.0, 0]]), 0.5)


def test_random_fold_is_valid(rng):
    border, _ = build_shape("trousers", 80)
    for _ in range(20):
        spec = random_fold(border, rng)
        s = apply_fold(border, spec)
        frac = np.mod(s.gt_fold[1] - s.gt_fold[0], TWO_PI) / TWO_PI
        assert 0.2 <= frac <= 0.8
        side = signed_side(border.vertices, spec.point, spec.direction)
        assert np.any(side > 0) and np.any(side < 0)


def test_dataset_entry_validation():
    with pytest.raises(InvalidPolygon):
        DatasetEntry("hat")
    with pytest.raises(ValueError):
        DatasetEntry("square", sigma=-1)


def test_dataset_shapes_and_determinism(tmp_path):
    shapes = ["square", "tshirt", "circle", "trousers"]
    a = generate_dataset(shapes, 46, 3)
    assert len(a) == 46
    assert [s.meta["shape"] for s in a[:4]] == shapes
    save_dataset(a, tmp_path / "a.jsonl")
    save_dataset(generate_dataset(shapes, 46, 3), tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    back = load_dataset(tmp_path / "a.jsonl")
    assert np.array_equal(back[5].end.vertices, a[5].end.vertices)
    assert back[5].gt_fold == a[5].gt_fold


def test_dataset_prefix_stable():
    # sample k depends only on its own spawned seed
    a = generate_dataset(["square"], 5, 11)
    b = generate_dataset(["square"], 8, 11)
    assert all(np.array_equal(x.end.vertices, y.end.vertices) for x, y in zip(a, b))
    assert sample_seeds(3, 11) == sample_seeds(5, 11)[:3]


def test_noisy_dataset_is_not_planar():
    for s in generate_dataset([DatasetEntry("square", 0.01)], 6, 2):
        assert np.ptp(s.start.vertices[:, 2]) > 0


def test_fold_sample_json():
    s = generate_dataset(["rectangle"], 1, 4)[0]
    back = FoldSample.from_json(s.to_json())
    assert back.meta == s.meta and back.corners == s.corners
    assert isinstance(back.start, BorderCurve)

