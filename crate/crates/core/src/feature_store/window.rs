//! Sliding-window clip extraction.

use super::{ClipFeatureMatrix, ClipOrigin, FrameFeatureSequence};

/// Cuts `seq` into t-frame clips starting at 0, stride, 2·stride, …
///
/// Yields `floor((frames - t) / stride) + 1` clips when the sequence is long
/// enough, otherwise none. Each clip is transposed to dim × t so a column
/// holds one frame's features.
pub fn window_clips(
    seq: &FrameFeatureSequence,
    video_id: &str,
    t: usize,
    stride: usize,
) -> Vec<ClipFeatureMatrix> {
    assert!(t >= 1 && stride >= 1, "t and stride must be >= 1");
    window_clips_in_range(seq, video_id, 0..seq.frames(), t, stride)
}

/// Same as [`window_clips`] but restricted to a frame range (used by the
/// half-video split).
pub fn window_clips_in_range(
    seq: &FrameFeatureSequence,
    video_id: &str,
    range: std::ops::Range<usize>,
    t: usize,
    stride: usize,
) -> Vec<ClipFeatureMatrix> {
    assert!(t >= 1 && stride >= 1, "t and stride must be >= 1");
    assert!(range.end <= seq.frames(), "range exceeds sequence length");
    let mut clips = Vec::new();
    let mut start = range.start;
    while start + t <= range.end {
        clips.push(cut_clip(seq, video_id, start, t));
        start += stride;
    }
    clips
}

fn cut_clip(
    seq: &FrameFeatureSequence,
    video_id: &str,
    start: usize,
    t: usize,
) -> ClipFeatureMatrix {
    let dim = seq.dim();
    let mut data = vec![0.0; dim * t];
    for tau in 0..t {
        let row = seq.row(start + tau);
        for d in 0..dim {
            data[d * t + tau] = row[d];
        }
    }
    ClipFeatureMatrix {
        dim,
        t,
        data,
        origin: ClipOrigin { video_id: video_id.to_string(), start_frame: start },
    }
}
