#!/usr/bin/env python3
"""Convert tiny-autoencoder PyTorch weights into the LFWT named-tensor file.

Usage:
    convert_taesd.py --encoder taesd_encoder.pth --decoder taesd_decoder.pth out.lfwt
    convert_taesd.py --combined taesd.pth out.lfwt

Split checkpoints have keys like "1.conv.0.weight"; they are prefixed with
"encoder." / "decoder.". A combined checkpoint must already carry the prefixes.
"""

import argparse
import struct
import sys

import torch

MAGIC = b"LFWT0001"


def load(path):
    sd = torch.load(path, map_location="cpu", weights_only=True)
    if isinstance(sd, dict) and "state_dict" in sd:
        sd = sd["state_dict"]
    return {k: v for k, v in sd.items() if torch.is_tensor(v)}


def write(path, tensors):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            t = tensors[name].detach().to(torch.float32).contiguous()
            raw = name.encode()
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", t.dim()))
            f.write(struct.pack(f"<{t.dim()}I", *t.shape))
            f.write(t.numpy().astype("<f4").tobytes())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--encoder")
    ap.add_argument("--decoder")
    ap.add_argument("--combined")
    ap.add_argument("out")
    a = ap.parse_args()

    tensors = {}
    if a.combined:
        tensors = load(a.combined)
    elif a.encoder and a.decoder:
        tensors.update({"encoder." + k: v for k, v in load(a.encoder).items()})
        tensors.update({"decoder." + k: v for k, v in load(a.decoder).items()})
    else:
        ap.error("give --combined or both --encoder and --decoder")

    bad = [k for k in tensors if not k.startswith(("encoder.", "decoder."))]
    if bad:
        sys.exit(f"unexpected tensor names (first: {bad[0]})")
    write(a.out, tensors)
    print(f"wrote {len(tensors)} tensors to {a.out}")


if __name__ == "__main__":
    main()
