"""Act segmentation toolkit for historical registers.

Segments register pages into typed acts (full / start / center / end):
rule-based first-line classification from transcriptions, enriched-image
rendering for segmentation models, label-map post-processing into scored
act objects, a text-only baseline segmenter, and the object/pixel/text
evaluation suite.
"""

__version__ = "0.1.0"
