#!/usr/bin/env python3
"""Write torchvision VGG-19 conv weights as a tensor archive for --vgg-weights.

    python3 tools/convert_vgg19.py vgg19.pth            # saved state dict
    python3 tools/convert_vgg19.py --download out.dcnt  # fetch via torchvision

The archive only makes sense with a full-width extractor (width_divisor 1).
"""
import argparse
import json
import struct

import numpy as np
import torch

MAGIC = b"DCNGTNS\0"
VERSION = 1


def load_state(args):
    if args.download:
        import torchvision

        return torchvision.models.vgg19(weights="IMAGENET1K_V1").state_dict()
    return torch.load(args.source, map_location="cpu")


def write_archive(path, tensors, meta):
    entries, blobs, offset = [], [], 0
    for name, t in tensors:
        a = np.ascontiguousarray(t.detach().cpu().numpy(), dtype="<f4")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        blobs.append(a.tobytes())
        offset += a.nbytes
    header = json.dumps({"meta": meta, "tensors": entries}).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", VERSION, len(header)))
        f.write(header)
        for b in blobs:
            f.write(b)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("source", nargs="?", help="torch state dict (.pth)")
    p.add_argument("out", nargs="?", default="vgg19.dcnt")
    p.add_argument("--download", action="store_true")
    args = p.parse_args()
    if args.download and args.source and args.out == "vgg19.dcnt":
        args.out = args.source  # "--download out.dcnt"
    elif not args.download and not args.source:
        p.error("give a state dict or --download")

    state = load_state(args)
    convs = sorted(
        (k for k in state if k.startswith("features.") and k.endswith((".weight", ".bias"))),
        key=lambda k: (int(k.split(".")[1]), k),
    )
    write_archive(args.out, [(k, state[k]) for k in convs], {"kind": "vgg19-features"})
    print(f"wrote {len(convs)} tensors to {args.out}")


if __name__ == "__main__":
    main()
