"""wavepipe: a desk-scale streaming dataflow system.

Fine-grained workflow graphs of processing elements joined by ordered
streams, enacted on sequential, threaded or multiprocess backends, with
lineage capture, a hierarchical component registry, seismology kernels
and an HTTP gateway.
"""

__version__ = "0.1.0"
