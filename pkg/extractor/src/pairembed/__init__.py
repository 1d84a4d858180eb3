"""Fixed-dimension embeddings for (first, second) discourse-unit pairs.

The two unit texts occupy the two segment slots of a pretrained
bidirectional encoder, so the representation keeps them somewhat
separate. Output is the line-delimited embedding file consumed by the
analysis toolkit (header line with the dimension, then one vector per
task).
"""

from pairembed.extract import ExtractorConfig, ModelLoadFailure, embed_pairs

__all__ = ["ExtractorConfig", "ModelLoadFailure", "embed_pairs"]
