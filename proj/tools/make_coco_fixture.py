#!/usr/bin/env python3
"""Writes the synthetic COCO-format corpus used by the split-builder tests."""
import argparse
import json
import random

MAJORITY = ["person", "car", "chair", "dog", "bottle", "cup"]
MINORITY = ["teddy bear", "toaster", "hair drier", "parking meter"]
OTHER = ["sports ball"]


def build(images, seed):
    rng = random.Random(seed)
    names = MAJORITY + MINORITY + OTHER
    categories = [{"id": i + 1, "name": n, "supercategory": "thing"} for i, n in enumerate(names)]
    imgs = [{"id": 1000 + i, "file_name": "img_%05d.jpg" % i, "width": 640, "height": 480} for i in range(images)]
    anns = []

    def box():
        x, y = rng.randint(0, 500), rng.randint(0, 350)
        w, h = rng.randint(10, 120), rng.randint(10, 120)
        return [float(x), float(y), float(w), float(h)]

    def add(image_id, cat):
        b = box()
        anns.append({"id": len(anns) + 1, "image_id": image_id, "category_id": cat, "bbox": b,
                     "area": b[2] * b[3], "iscrowd": 0})

    for im in imgs:
        for _ in range(rng.choice([0, 1, 1, 2, 2, 3])):
            add(im["id"], rng.randint(1, len(MAJORITY)))
    for k in range(len(MINORITY)):
        cat = len(MAJORITY) + k + 1
        for im in rng.sample(imgs, 8):
            for _ in range(rng.randint(1, 3)):
                add(im["id"], cat)
    for im in rng.sample(imgs, 5):
        add(im["id"], len(names))
    return {"images": imgs, "annotations": anns, "categories": categories}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--images", type=int, default=200)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()
    with open(args.out, "w") as f:
        json.dump(build(args.images, args.seed), f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
