//! Intersection over union and series means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// `|pred ∩ gt| / |pred ∪ gt|`, with two empty masks scoring 1.0.
pub fn iou(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    let union = pred.union_count(gt)?;
    if union == 0 {
        return Ok(1.0);
    }
    let inter = pred.intersection_count(gt)?;
    Ok(inter as f64 / union as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IoUEntry {
    pub frame_index: usize,
    pub iou: f64,
    pub gt_present: bool,
}

/// Per-frame IoU values in strictly increasing frame order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IoUSeries {
    entries: Vec<IoUEntry>,
}

impl IoUSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, frame_index: usize, iou: f64, gt_present: bool) -> Result<()> {
        if !(0.0..=1.0).contains(&iou) {
            return Err(Error::Report(format!(
                "iou {iou} outside [0, 1] at frame {frame_index}"
            )));
        }
        if let Some(last) = self.entries.last() {
            if frame_index <= last.frame_index {
                return Err(Error::Report(format!(
                    "frame {frame_index} does not follow frame {}",
                    last.frame_index
                )));
            }
        }
        self.entries.push(IoUEntry {
            frame_index,
            iou,
            gt_present,
        });
        Ok(())
    }

    pub fn entries(&self) -> &[IoUEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries that count towards the mean under the given exclusion rule.
    pub fn included(&self, exclude_absent_gt: bool) -> impl Iterator<Item = &IoUEntry> {
        self.entries
            .iter()
            .filter(move |e| e.gt_present || !exclude_absent_gt)
    }
}

/// Unweighted mean over frames. With `exclude_absent_gt`, frames whose
/// ground truth is empty are skipped; if nothing remains the result is
/// [`Error::NoEvaluableFrames`] rather than zero.
pub fn mean_iou(series: &IoUSeries, exclude_absent_gt: bool) -> Result<f64> {
    let (sum, count) = series
        .included(exclude_absent_gt)
        .fold((0.0, 0usize), |(s, c), e| (s + e.iou, c + 1));
    if count == 0 {
        return Err(Error::NoEvaluableFrames);
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(w: u32, h: u32, x0: u32, x1: u32, y0: u32, y1: u32) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| {
            (x0..=x1).contains(&x) && (y0..=y1).contains(&y)
        })
        .unwrap()
    }

    fn series(items: &[(usize, f64, bool)]) -> IoUSeries {
        let mut s = IoUSeries::new();
        for &(i, v, p) in items {
            s.push(i, v, p).unwrap();
        }
        s
    }

    #[test]
    fn iou_examples() {
        let a = rect(10, 10, 2, 6, 2, 6);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        let b = rect(10, 10, 8, 9, 8, 9);
        assert_eq!(iou(&a, &b).unwrap(), 0.0);
        // 50 px vs 50 px sharing 25 px
        let pred = rect(10, 10, 0, 9, 0, 4);
        let gt = rect(10, 10, 5, 9, 0, 9);
        assert_eq!(pred.area(), 50);
        assert_eq!(gt.area(), 50);
        assert_eq!(iou(&pred, &gt).unwrap(), 25.0 / 75.0);
    }

    #[test]
    fn empty_pair_scores_one() {
        let e = BinaryMask::new(4, 4).unwrap();
        assert_eq!(iou(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn iou_dimension_mismatch() {
        let a = BinaryMask::new(4, 4).unwrap();
        let b = BinaryMask::new(4, 5).unwrap();
        assert!(iou(&a, &b).is_err());
    }

    #[test]
    fn mean_examples() {
        assert_eq!(
            mean_iou(&series(&[(0, 1.0, true), (1, 0.5, true)]), true).unwrap(),
            0.75
        );
        assert_eq!(
            mean_iou(&series(&[(0, 1.0, true), (1, 0.0, false)]), true).unwrap(),
            1.0
        );
        assert_eq!(
            mean_iou(&series(&[(0, 1.0, true), (1, 0.0, false)]), false).unwrap(),
            0.5
        );
        assert_eq!(
            mean_iou(&series(&[(0, 0.0, true), (3, 0.0, true)]), true).unwrap(),
            0.0
        );
    }

    #[test]
    fn all_absent_is_distinct_from_zero() {
        let s = series(&[(0, 1.0, false), (1, 1.0, false)]);
        assert!(matches!(mean_iou(&s, true), Err(Error::NoEvaluableFrames)));
        assert!(matches!(
            mean_iou(&IoUSeries::new(), false),
            Err(Error::NoEvaluableFrames)
        ));
    }

    #[test]
    fn series_rejects_bad_entries() {
        let mut s = IoUSeries::new();
        s.push(3, 0.5, true).unwrap();
        assert!(s.push(3, 0.5, true).is_err());
        assert!(s.push(4, 1.5, true).is_err());
        assert!(s.push(4, -0.1, true).is_err());
    }

    fn mask_pair() -> impl Strategy<Value = (u32, u32, Vec<bool>, Vec<bool>)> {
        (1u32..=12, 1u32..=12).prop_flat_map(|(w, h)| {
            let n = (w * h) as usize;
            (
                Just(w),
                Just(h),
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_reflexive((w, h, a, b) in mask_pair()) {
            let a = BinaryMask::from_bools(w, h, &a).unwrap();
            let b = BinaryMask::from_bools(w, h, &b).unwrap();
            prop_assert_eq!(iou(&a, &b).unwrap(), iou(&b, &a).unwrap());
            prop_assert_eq!(iou(&a, &a).unwrap(), 1.0);
        }

        #[test]
        fn adding_gt_pixels_never_lowers_iou(
            (w, h, p, g) in mask_pair(),
            pick in prop::collection::vec(any::<bool>(), 1..64),
        ) {
            let gt = BinaryMask::from_bools(w, h, &g).unwrap();
            let pred = BinaryMask::from_bools(w, h, &p).unwrap();
            let grown: Vec<bool> = p
                .iter()
                .zip(&g)
                .zip(pick.iter().cycle())
                .map(|((&pp, &gg), &k)| pp || (gg && k))
                .collect();
            let grown = BinaryMask::from_bools(w, h, &grown).unwrap();
            prop_assert!(iou(&grown, &gt).unwrap() >= iou(&pred, &gt).unwrap());
        }

        #[test]
        fn absent_entries_do_not_move_excluded_mean(
            vals in prop::collection::vec(0.0f64..=1.0, 1..20),
            extra in 1usize..10,
        ) {
            let mut s = IoUSeries::new();
            for (i, v) in vals.iter().enumerate() {
                s.push(i, *v, true).unwrap();
            }
            let before = mean_iou(&s, true).unwrap();
            for k in 0..extra {
                s.push(vals.len() + k, 0.0, false).unwrap();
            }
            prop_assert_eq!(mean_iou(&s, true).unwrap(), before);
        }
    }
}
