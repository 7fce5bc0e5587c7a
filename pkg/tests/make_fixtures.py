"""Regenerate the golden buffers from the scalar oracle.

    python tests/make_fixtures.py

Writes ``tests/fixtures/elements/*.img`` (output) and ``*.ties`` (1 where the
oracle's unrounded value was a .5 tie). Only needs to run when the element
definitions change.
"""

from pathlib import Path

import numpy as np

from oracle_kernels import ELEMENTS, GEOMETRIC, apply_with_ties

HERE = Path(__file__).parent / "fixtures"


def write(path, arr):
    arr = np.asarray(arr, dtype=np.uint8)
    h, w, c = arr.shape
    path.write_bytes(f"{h} {w} {c}\n".encode("ascii") + arr.tobytes())


def inputs():
    rng = np.random.default_rng(20240611)
    rgb = rng.integers(0, 256, size=(7, 9, 3), dtype=np.uint8)
    yy, xx = np.mgrid[0:6, 0:6]
    gray = ((yy * 37 + xx * 11) % 256).astype(np.uint8)[..., None]
    return {"rgb": rgb, "gray": gray}


def cases():
    for i, (kind, mag) in enumerate(ELEMENTS):
        for sign in (1, -1) if kind in GEOMETRIC else (1,):
            yield i, kind, mag, sign


def case_name(i, sign, image):
    return f"e{i:02d}{'p' if sign > 0 else 'm'}_{image}"


def main():
    out = HERE / "elements"
    out.mkdir(parents=True, exist_ok=True)
    ins = inputs()
    for name, img in ins.items():
        write(HERE / f"input_{name}.img", img)
    for i, kind, mag, sign in cases():
        for name, img in ins.items():
            res, ties = apply_with_ties(img.tolist(), kind, mag, sign)
            write(out / f"{case_name(i, sign, name)}.img", res)
            write(out / f"{case_name(i, sign, name)}.ties", ties)
    # composite operation: Brightness 1.3 then Solarize 102
    first, _ = apply_with_ties(ins["rgb"].tolist(), "Brightness", 1.3)
    second, _ = apply_with_ties(first, "Solarize", 102.0)
    write(HERE / "op_brightness13_solarize102_rgb.img", second)
    # 4x1 equalize example
    eq_in = np.array([[[3]], [[3]], [[7]], [[200]]], dtype=np.uint8)
    write(HERE / "equalize_4x1_input.img", eq_in)
    write(HERE / "equalize_4x1_output.img", apply_with_ties(eq_in.tolist(), "Equalize", None)[0])


if __name__ == "__main__":
    main()
