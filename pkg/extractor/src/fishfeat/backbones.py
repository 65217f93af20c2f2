"""Frozen vision backbones that map an image batch to flat embeddings.

Each name resolves to a torchvision constructor with the classifier head
cut off, so the forward pass returns the global-pooled penultimate
activation. When no weights file is given the net is initialized from a
seed derived from its name: useless for recognition quality, but
deterministic, shape-correct, and exactly as frozen as a real checkpoint
- which is all the downstream contract depends on. Point ``weights`` at
a saved ``state_dict`` to extract with a real model.
"""

import hashlib

import torch
from torchvision import models
from torchvision import transforms

# name -> (constructor, embedding dim, name of the head attribute to drop)
_SPECS = {
    "resnet18": (models.resnet18, 512, "fc"),
    "resnet50": (models.resnet50, 2048, "fc"),
    "swin_t": (models.swin_t, 768, "head"),
}

# the standard 224x224 evaluation pipeline; fixed, so the same file always
# produces the same tensor
PREPROCESS = transforms.Compose([
    transforms.Resize(256),
    transforms.CenterCrop(224),
    transforms.ToTensor(),
    transforms.Normalize(mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]),
])


def names() -> list[str]:
    return sorted(_SPECS)


def embedding_dim(name: str) -> int:
    _check(name)
    return _SPECS[name][1]


def _check(name: str):
    if name not in _SPECS:
        raise ValueError(f"unknown backbone {name!r}; pick one of {', '.join(names())}")


def _init_seed(name: str) -> int:
    # stable across runs and platforms (never Python's hash())
    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:4], "little")


def build(name: str, weights=None, device: str = "cpu") -> torch.nn.Module:
    """Construct the named backbone, headless, frozen, in eval mode."""
    _check(name)
    ctor, _, head = _SPECS[name]
    with torch.random.fork_rng():  # do not disturb the caller's RNG state
        torch.manual_seed(_init_seed(name))
        net = ctor(weights=None)
    if weights is not None:
        state = torch.load(weights, map_location="cpu")
        net.load_state_dict(state)
    setattr(net, head, torch.nn.Identity())
    net.to(device)
    net.eval()
    net.requires_grad_(False)
    return net


def weights_checksum(net: torch.nn.Module) -> str:
    """SHA-256 over every parameter and buffer, in state-dict order."""
    h = hashlib.sha256()
    for key, tensor in sorted(net.state_dict().items()):
        h.update(key.encode())
        h.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()
