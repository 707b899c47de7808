"""regpack: randomized edge-disjoint packing of bounded-degree graphs
into super-regular host graphs, with regularity certificates, uniform
matching samplers, flow-based degree regularization, and an independent
verifier."""

__version__ = "0.1.0"
