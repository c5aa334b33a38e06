"""Regenerate the bundled head-motion data files."""
from petmotion.datasets import HEAD_MARKERS, HEAD_TRAJECTORY, data_path
from petmotion.trajectory import (head_like_trajectory, process_markers, read_markers,
                                  synthesize_markers, write_markers, write_trajectory)

markers = data_path(HEAD_MARKERS)
write_markers(markers, synthesize_markers(head_like_trajectory(duration=31.0)))
# process what was written, so the two files agree with the command-line pipeline
write_trajectory(data_path(HEAD_TRAJECTORY), process_markers(read_markers(markers)))
print("wrote", markers, "and", data_path(HEAD_TRAJECTORY))
