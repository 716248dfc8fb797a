#!/usr/bin/env python3
"""Regenerate the bundled mini-corpus under crates/core/assets/minicorpus.

Face images are deterministic crops/rescales/photometric variants of two
public-domain portraits (NASA astronaut Eileen Collins from scikit-image,
Grace Hopper from matplotlib's sample data). Face-free images are crops of
scikit-image / scikit-learn sample images plus a few synthetic patterns.

Requires numpy, Pillow, scikit-image, scikit-learn and matplotlib.
Output is deterministic for a given set of source files.
"""
import json
import os

import numpy as np
from PIL import Image, ImageFilter

import matplotlib
import skimage
import sklearn.datasets

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "assets", "minicorpus")
SK = os.path.join(os.path.dirname(skimage.__file__), "data")
MPL = os.path.join(os.path.dirname(matplotlib.__file__), "mpl-data", "sample_data")
SKL = os.path.join(os.path.dirname(sklearn.datasets.__file__), "images")

# Hand-annotated in source-image pixel coordinates. "left"/"right" are image sides.
SOURCES = [
    {
        "path": os.path.join(SK, "astronaut.png"),
        "box": [177, 66, 95, 95],
        "kp": {
            "eye_outer_left": (193, 101), "eye_inner_left": (212, 101),
            "eye_inner_right": (237, 103), "eye_outer_right": (256, 103),
            "nose_tip": (223, 128),
            "mouth_left": (202, 141), "mouth_right": (246, 141),
        },
        "attrs": {"glasses": False, "hat": False, "neutral": True},
    },
    {
        "path": os.path.join(MPL, "grace_hopper.jpg"),
        "box": [155, 105, 222, 222],
        "kp": {
            "eye_outer_left": (202, 190), "eye_inner_left": (237, 191),
            "eye_inner_right": (287, 187), "eye_outer_right": (322, 185),
            "nose_tip": (265, 237),
            "mouth_left": (237, 275), "mouth_right": (295, 275),
        },
        "attrs": {"glasses": True, "hat": True, "neutral": False},
    },
]

FLIP_NAMES = {
    "eye_outer_left": "eye_outer_right", "eye_outer_right": "eye_outer_left",
    "eye_inner_left": "eye_inner_right", "eye_inner_right": "eye_inner_left",
    "mouth_left": "mouth_right", "mouth_right": "mouth_left",
    "nose_tip": "nose_tip",
}

NEGATIVES = [
    "coffee.png", "rocket.jpg", "brick.png", "grass.png", "gravel.png", "moon.png",
    "hubble_deep_field.jpg", "motorcycle_left.png", "retina.jpg", "page.png", "text.png",
    "clock_motion.png", "color.png", "cell.png", "ihc.png", "chelsea.png",
]


def r2(v):
    return round(float(v), 2)


def face_variant(rng, src, idx, img):
    bx, by, bw, bh = src["box"]
    target = rng.uniform(62, 100)
    s = target / bw
    out_w = int(round(target * rng.uniform(1.7, 2.3)))
    out_h = int(round(target * rng.uniform(1.7, 2.3)))
    # face placement inside the output canvas
    fx = rng.uniform(0.15, 0.85) * (out_w - target)
    fy = rng.uniform(0.15, 0.85) * (out_h - target)
    # source-space crop origin
    ox = bx - fx / s
    oy = by - fy / s
    crop = (ox, oy, ox + out_w / s, oy + out_h / s)
    im = img.transform((out_w, out_h), Image.EXTENT, crop, resample=Image.BILINEAR)
    flip = rng.uniform() < 0.5
    arr = np.asarray(im).astype(np.float64)
    gain = rng.uniform(0.75, 1.2)
    bias = rng.uniform(-20, 20)
    arr = np.clip(arr * gain + bias, 0, 255)
    gray = rng.uniform() < 0.25
    if gray:
        arr = np.clip(np.round(arr @ np.array([0.299, 0.587, 0.114])), 0, 255)
    im = Image.fromarray(arr.round().astype(np.uint8))
    if rng.uniform() < 0.3:
        im = im.filter(ImageFilter.GaussianBlur(rng.uniform(0.3, 0.9)))
    if flip:
        im = im.transpose(Image.FLIP_LEFT_RIGHT)

    def tx(x, y):
        nx = (x - ox) * s
        ny = (y - oy) * s
        if flip:
            nx = out_w - nx
        return nx, ny

    box_x = fx if not flip else out_w - fx - target
    kps = []
    for name, (x, y) in src["kp"].items():
        nx, ny = tx(x, y)
        kps.append({"name": FLIP_NAMES[name] if flip else name, "x": r2(nx), "y": r2(ny), "occluded": False})
    kps.sort(key=lambda k: k["name"])
    face = {
        "box": [r2(box_x), r2(fy), r2(target), r2(target * bh / bw)],
        "keypoints": kps,
        "attributes": src["attrs"],
    }
    name = f"face_{idx:02d}.png"
    im.save(os.path.join(OUT, "images", name), optimize=True)
    return {"image": f"images/{name}", "faces": [face], "tags": {"source": os.path.basename(src["path"]).split(".")[0], "grayscale": bool(gray), "flipped": bool(flip)}}


def negative(rng, idx, kind):
    if kind.endswith((".png", ".jpg")):
        p = os.path.join(SK, kind) if os.path.exists(os.path.join(SK, kind)) else os.path.join(SKL, kind)
        img = Image.open(p).convert("RGB")
        w, h = img.size
        side = int(min(w, h) * rng.uniform(0.5, 0.9))
        x = int(rng.uniform(0, w - side))
        y = int(rng.uniform(0, h - side))
        out = int(rng.uniform(150, 200))
        im = img.crop((x, y, x + side, y + side)).resize((out, out), Image.BILINEAR)
    elif kind == "gradient":
        g = np.tile(np.linspace(0, 255, 180), (160, 1))
        im = Image.fromarray(g.round().astype(np.uint8))
    elif kind == "checker":
        yy, xx = np.mgrid[0:160, 0:160]
        im = Image.fromarray((((xx // 20 + yy // 20) % 2) * 200 + 30).astype(np.uint8))
    else:
        n = rng.normal(128, 40, (160, 160)).clip(0, 255)
        im = Image.fromarray(n.round().astype(np.uint8)).filter(ImageFilter.GaussianBlur(3))
    name = f"noface_{idx:02d}.png"
    im.save(os.path.join(OUT, "images", name), optimize=True)
    return {"image": f"images/{name}", "faces": [], "tags": {"source": kind.split(".")[0]}}


def main():
    os.makedirs(os.path.join(OUT, "images"), exist_ok=True)
    rng = np.random.RandomState(20160307)
    faces = []
    imgs = [Image.open(s["path"]).convert("RGB") for s in SOURCES]
    for i in range(40):
        k = i % 2
        faces.append(face_variant(rng, SOURCES[k], i, imgs[k]))
    with open(os.path.join(OUT, "faces.jsonl"), "w") as f:
        for e in faces:
            f.write(json.dumps(e, sort_keys=True) + "\n")
    negs = []
    kinds = NEGATIVES + ["china.jpg", "flower.jpg", "gradient", "checker", "noise"]
    for i, kind in enumerate(kinds):
        negs.append(negative(rng, i, kind))
    with open(os.path.join(OUT, "negatives.jsonl"), "w") as f:
        for e in negs:
            f.write(json.dumps(e, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
