"""camoseg: zero-shot segmentation of camouflaged moving objects in video.

Motion cues (optical flow or background subtraction, routed by camera
motion) highlight the object, an open-vocabulary detector finds it, and a
promptable video segmenter tracks it in both temporal directions. A metrics
suite with explicit aggregation semantics scores the results.
"""

__version__ = "0.1.0"
