import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from make_fixtures import case_name, cases
from onlineaug.augment import (
    FILL,
    NUM_OPERATIONS,
    AugElement,
    AugOperation,
    ImageError,
    _affine,
    apply_element,
    apply_operation,
    element_catalog,
    element_index,
    operation_from_index,
    operation_index,
    read_fixture,
    to_uint8,
    write_fixture,
)
from onlineaug.kernels import warp_affine
from oracle_kernels import ELEMENTS, apply_with_ties

CAT = element_catalog()
NAMES = {e.name: i for i, e in enumerate(CAT)}

images = st.tuples(st.integers(1, 7), st.integers(1, 7), st.sampled_from([1, 3])).flatmap(
    lambda s: arrays(np.uint8, s)
)


def assert_matches_oracle(got, want, ties):
    diff = np.abs(got.astype(int) - np.asarray(want, dtype=int))
    ties = np.asarray(ties, dtype=bool)
    assert not diff[~ties].any(), f"{int((diff[~ties] > 0).sum())} non-tie samples differ"
    assert diff.max(initial=0) <= 1


def test_catalog_shape():
    assert len(CAT) == 36 and len(set(CAT)) == 36
    assert [(e.kind, e.magnitude) for e in CAT] == ELEMENTS
    assert sum(e.magnitude is None for e in CAT) == 3
    assert all(e.signed == (e.kind in {"HorizontalShear", "VerticalShear", "HorizontalTranslate",
                                        "VerticalTranslate", "Rotate"}) for e in CAT)
    assert not any(e.signed for e in element_catalog(signed=False))


def test_operation_indexing_roundtrip():
    ks = [operation_index(operation_from_index(k)) for k in range(NUM_OPERATIONS)]
    assert ks == list(range(NUM_OPERATIONS))
    op = operation_from_index(36 * 8 + 24)
    assert (op.first.name, op.second.name) == ("HorizontalTranslate(0.45)", "Contrast(1.3)")
    with pytest.raises(IndexError):
        operation_from_index(NUM_OPERATIONS)


def test_element_validation():
    with pytest.raises(ValueError):
        AugElement("Blur", 0)
    with pytest.raises(ValueError):
        AugElement("Invert", 1)
    with pytest.raises(ValueError):
        AugElement("Rotate", 3)
    assert element_index(AugElement("Invert")) == 35


@pytest.mark.parametrize("case", list(cases()), ids=lambda c: f"{c[0]:02d}{c[1]}{'+' if c[3] > 0 else '-'}")
@pytest.mark.parametrize("image", ["rgb", "gray"])
def test_golden_buffers(fixtures_dir, case, image):
    i, _, _, sign = case
    img = read_fixture(fixtures_dir / f"input_{image}.img")
    name = case_name(i, sign, image)
    want = read_fixture(fixtures_dir / "elements" / f"{name}.img")
    ties = read_fixture(fixtures_dir / "elements" / f"{name}.ties")
    assert_matches_oracle(apply_element(img, CAT[i], sign), want, ties)


def test_golden_composite_operation(fixtures_dir):
    img = read_fixture(fixtures_dir / "input_rgb.img")
    want = read_fixture(fixtures_dir / "op_brightness13_solarize102_rgb.img")
    op = AugOperation(CAT[NAMES["Brightness(1.3)"]], CAT[NAMES["Solarize(102)"]])
    # one multiply per sample on both sides, so even .5 ties round the same way
    assert np.array_equal(apply_operation(img, op), want)


def test_golden_equalize_4x1(fixtures_dir):
    img = read_fixture(fixtures_dir / "equalize_4x1_input.img")
    want = read_fixture(fixtures_dir / "equalize_4x1_output.img")
    assert np.array_equal(apply_element(img, CAT[NAMES["Equalize"]]), want)
    assert want.ravel().tolist() == [128, 128, 191, 255]


@settings(max_examples=40, deadline=None)
@given(img=images, i=st.integers(0, 35), sign=st.sampled_from([1, -1]))
def test_live_oracle(img, i, sign):
    kind, mag = ELEMENTS[i]
    want, ties = apply_with_ties(img.tolist(), kind, mag, sign if CAT[i].signed else 1)
    assert_matches_oracle(apply_element(img, CAT[i], sign), want, ties)


def test_solarize_threshold_example():
    img = np.array([[[25]], [[26]]], dtype=np.uint8)
    out = apply_element(img, CAT[NAMES["Solarize(26)"]])
    assert out.ravel().tolist() == [25, 229]


def test_rotate_zero_is_identity():
    img = np.random.default_rng(0).integers(0, 256, size=(5, 6, 3), dtype=np.uint8)
    coeffs = np.array(_affine("Rotate", 0.0, 1, 5, 6))
    assert np.array_equal(to_uint8(warp_affine(img.astype(float), coeffs, FILL)), img)


def test_posterize_floors_bits():
    img = np.array([[[0b10111111]]], dtype=np.uint8)
    outs = [int(apply_element(img, CAT[NAMES[f"Posterize({m})"]])[0, 0, 0]) for m in ("4.4", "5.6", "6.8")]
    assert outs == [0b10110000, 0b10111000, 0b10111100]


@settings(max_examples=100, deadline=None)
@given(img=images)
def test_involution_and_idempotence(img):
    inv, post, auto = CAT[NAMES["Invert"]], CAT[NAMES["Posterize(4.4)"]], CAT[NAMES["AutoContrast"]]
    assert np.array_equal(apply_element(apply_element(img, inv), inv), img)
    once = apply_element(img, post)
    assert np.array_equal(apply_element(once, post), once)
    op = AugOperation(post, post)
    assert np.array_equal(apply_operation(img, op), once)
    a1 = apply_element(img, auto)
    assert np.array_equal(apply_element(a1, auto), a1)


@settings(max_examples=60, deadline=None)
@given(img=images, k=st.integers(0, NUM_OPERATIONS - 1), s1=st.sampled_from([1, -1]), s2=st.sampled_from([1, -1]))
def test_operation_is_composition(img, k, s1, s2):
    op = operation_from_index(k)
    out = apply_operation(img, op, (s1, s2))
    assert out.shape == img.shape and out.dtype == np.uint8
    assert np.array_equal(out, apply_element(apply_element(img, op.first, s1), op.second, s2))


def test_sign_ignored_for_photometric():
    img = np.random.default_rng(1).integers(0, 256, size=(4, 4, 3), dtype=np.uint8)
    for e in CAT[15:]:
        assert np.array_equal(apply_element(img, e, 1), apply_element(img, e, -1))


def test_operation_signs_from_generator():
    img = np.random.default_rng(2).integers(0, 256, size=(6, 6, 1), dtype=np.uint8)
    op = operation_from_index(36 * 14 + 8)
    a = apply_operation(img, op, np.random.default_rng(9))
    b = apply_operation(img, op, np.random.default_rng(9))
    assert np.array_equal(a, b)


@pytest.mark.parametrize(
    "bad",
    [np.zeros((0, 3, 3), np.uint8), np.zeros((3, 3, 2), np.uint8), np.zeros((3, 3), np.uint8), np.zeros((3, 3, 3))],
)
def test_rejects_bad_images(bad):
    with pytest.raises(ImageError):
        apply_element(bad, CAT[0])


def test_rejects_bad_sign():
    with pytest.raises(ValueError):
        apply_element(np.zeros((2, 2, 1), np.uint8), CAT[0], 0)


def test_fixture_roundtrip(tmp_path):
    img = np.arange(24, dtype=np.uint8).reshape(2, 4, 3)
    write_fixture(tmp_path / "a.img", img)
    assert (tmp_path / "a.img").read_bytes()[:6] == b"2 4 3\n"
    assert np.array_equal(read_fixture(tmp_path / "a.img"), img)
    (tmp_path / "b.img").write_bytes(b"2 2 1\n\x00")
    with pytest.raises(ImageError):
        read_fixture(tmp_path / "b.img")
