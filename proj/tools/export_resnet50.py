#!/usr/bin/env python3
"""Write torchvision ResNet-50 weights as a greyreid backbone weight file.

Usage:
  export_resnet50.py OUT.grbw                    # torchvision ImageNet weights (downloads)
  export_resnet50.py OUT.grbw --state-dict W.pth # a saved resnet50 state_dict
"""
import argparse
import struct

import torch


def load_state(path):
    if path:
        return torch.load(path, map_location="cpu")
    import torchvision
    return torchvision.models.resnet50(weights=torchvision.models.ResNet50_Weights.IMAGENET1K_V1).state_dict()


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("out")
    ap.add_argument("--state-dict", default="")
    args = ap.parse_args()

    state = load_state(args.state_dict)
    tensors = {k: v for k, v in state.items() if not k.startswith("fc.") and not k.endswith("num_batches_tracked")}
    with open(args.out, "wb") as f:
        f.write(b"GRBW")
        f.write(struct.pack("<IQ", 1, len(tensors)))
        for name in sorted(tensors):
            t = tensors[name].detach().to(torch.float32).contiguous()
            encoded = name.encode()
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", t.dim()))
            f.write(struct.pack(f"<{t.dim()}I", *t.shape))
            f.write(t.numpy().astype("<f4").tobytes())
    print(f"wrote {len(tensors)} tensors to {args.out}")


if __name__ == "__main__":
    main()
