//! Greedy frame-to-frame IoU tracker.

use super::iou;
use crate::model::BBox;

pub const DEFAULT_MAX_AGE: usize = 30;

#[derive(Debug, Clone)]
struct Track {
    id: u64,
    last_box: BBox,
    last_frame: usize,
}

/// Matches each frame's detections to live tracks by descending IoU above a
/// gate. Unmatched detections open tracks; a track that misses more than
/// `max_age` consecutive frames is closed.
#[derive(Debug, Clone)]
pub struct IouTracker {
    iou_gate: f64,
    max_age: usize,
    tracks: Vec<Track>,
    next_id: u64,
    frame: usize,
}

impl IouTracker {
    pub fn new(iou_gate: f64, max_age: usize) -> Self {
        Self {
            iou_gate,
            max_age,
            tracks: Vec::new(),
            next_id: 0,
            frame: 0,
        }
    }

    /// Consumes the next frame and returns a track id per detection.
    pub fn update(&mut self, detections: &[BBox]) -> Vec<u64> {
        let frame = self.frame;
        self.frame += 1;
        let max_age = self.max_age;
        self.tracks
            .retain(|t| frame - t.last_frame - 1 <= max_age);

        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, t) in self.tracks.iter().enumerate() {
            for (di, d) in detections.iter().enumerate() {
                let o = iou(&t.last_box, d);
                if o > self.iou_gate {
                    pairs.push((o, ti, di));
                }
            }
        }
        // Descending IoU; ties by older track, then detection order.
        pairs.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(self.tracks[a.1].id.cmp(&self.tracks[b.1].id))
                .then(a.2.cmp(&b.2))
        });

        let mut ids: Vec<Option<u64>> = vec![None; detections.len()];
        let mut track_used = vec![false; self.tracks.len()];
        for (_, ti, di) in pairs {
            if track_used[ti] || ids[di].is_some() {
                continue;
            }
            track_used[ti] = true;
            let t = &mut self.tracks[ti];
            t.last_box = detections[di];
            t.last_frame = frame;
            ids[di] = Some(t.id);
        }
        ids.into_iter()
            .zip(detections)
            .map(|(id, d)| {
                id.unwrap_or_else(|| {
                    let id = self.next_id;
                    self.next_id += 1;
                    self.tracks.push(Track {
                        id,
                        last_box: *d,
                        last_frame: frame,
                    });
                    id
                })
            })
            .collect()
    }

    pub fn live_tracks(&self) -> usize {
        self.tracks.len()
    }
}

/// Runs an [`IouTracker`] over an ordered sequence of frames.
pub fn track_iou(frames: &[Vec<BBox>], iou_gate: f64, max_age: usize) -> Vec<Vec<u64>> {
    let mut tracker = IouTracker::new(iou_gate, max_age);
    frames.iter().map(|f| tracker.update(f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: f64, y: f64) -> BBox {
        BBox::body(x, y, x + 20.0, y + 40.0).unwrap()
    }

    #[test]
    fn translating_box_keeps_one_id() {
        let frames: Vec<Vec<BBox>> = (0..50).map(|i| vec![b(i as f64, 0.0)]).collect();
        let ids = track_iou(&frames, 0.3, DEFAULT_MAX_AGE);
        assert!(ids.iter().all(|f| f == &vec![0]));
    }

    #[test]
    fn disjoint_boxes_get_distinct_ids() {
        let frames: Vec<Vec<BBox>> = (0..10).map(|_| vec![b(0.0, 0.0), b(500.0, 0.0)]).collect();
        let ids = track_iou(&frames, 0.3, DEFAULT_MAX_AGE);
        assert!(ids.iter().all(|f| f == &vec![0, 1]));
    }

    #[test]
    fn gap_longer_than_max_age_opens_new_track() {
        let max_age = 3;
        let run = |gap: usize| {
            let mut frames = vec![vec![b(0.0, 0.0)]];
            frames.extend((0..gap).map(|_| vec![]));
            frames.push(vec![b(0.0, 0.0)]);
            track_iou(&frames, 0.3, max_age)
        };
        assert_eq!(run(max_age).last().unwrap(), &vec![0]);
        assert_eq!(run(max_age + 1).last().unwrap(), &vec![1]);
    }

    #[test]
    fn greedy_prefers_highest_overlap() {
        let mut t = IouTracker::new(0.1, 5);
        assert_eq!(t.update(&[b(0.0, 0.0)]), vec![0]);
        // the second detection overlaps track 0 more, so it inherits the id
        let ids = t.update(&[b(8.0, 0.0), b(1.0, 0.0)]);
        assert_eq!(ids, vec![1, 0]);
    }

    #[test]
    fn gate_is_strict() {
        let mut t = IouTracker::new(1.0 / 3.0, 5);
        t.update(&[b(0.0, 0.0)]);
        // IoU of (0,0,20,40) and (10,0,30,40) is 400/1200 = 1/3
        assert_eq!(t.update(&[b(10.0, 0.0)]), vec![1]);
    }
}
