//! Peak finding on sampled curves.

/// A local maximum with its topographic prominence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub value: f64,
    pub prominence: f64,
}

/// Interior local maxima of `values` with their prominences.
///
/// Flat-topped maxima report the middle of the plateau. The prominence is the
/// height above the higher of the two lowest points reached before climbing
/// to a higher sample (or the array edge) on either side.
pub fn local_maxima(values: &[f64]) -> Vec<Peak> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                let index = (i + j) / 2;
                peaks.push(Peak {
                    index,
                    value: values[index],
                    prominence: prominence(values, i, j),
                });
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

fn prominence(values: &[f64], first: usize, last: usize) -> f64 {
    let top = values[first];
    let mut left_min = top;
    for k in (0..first).rev() {
        if values[k] > top {
            break;
        }
        left_min = left_min.min(values[k]);
    }
    let mut right_min = top;
    for &v in &values[last + 1..] {
        if v > top {
            break;
        }
        right_min = right_min.min(v);
    }
    top - left_min.max(right_min)
}

/// Maxima whose prominence is at least `rel` times the global maximum.
pub fn prominent_maxima(values: &[f64], rel: f64) -> Vec<Peak> {
    let peak = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Vec::new();
    }
    local_maxima(values)
        .into_iter()
        .filter(|p| p.prominence >= rel * peak)
        .collect()
}

/// Location of the intensity dip separating the two most prominent pulses,
/// or `None` when fewer than two pulses are present.
pub fn pulse_split_index(values: &[f64], rel: f64) -> Option<usize> {
    let mut peaks = prominent_maxima(values, rel);
    if peaks.len() < 2 {
        return None;
    }
    peaks.sort_by(|a, b| b.prominence.total_cmp(&a.prominence));
    let (a, b) = (peaks[0].index.min(peaks[1].index), peaks[0].index.max(peaks[1].index));
    (a..=b).min_by(|&i, &j| values[i].total_cmp(&values[j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_maxima() {
        let v = [0.0, 1.0, 0.5, 2.0, 2.0, 2.0, 1.0, 3.0, 0.0];
        let p = local_maxima(&v);
        let idx: Vec<_> = p.iter().map(|p| p.index).collect();
        assert_eq!(idx, vec![1, 4, 7]);
        assert_eq!(p[0].prominence, 0.5);
        assert_eq!(p[1].prominence, 1.0);
        assert_eq!(p[2].prominence, 3.0);
    }

    #[test]
    fn edges_are_not_peaks() {
        assert!(local_maxima(&[3.0, 2.0, 1.0]).is_empty());
        assert!(local_maxima(&[1.0, 2.0, 3.0]).is_empty());
        assert!(local_maxima(&[]).is_empty());
    }

    #[test]
    fn relative_threshold() {
        let v = [0.0, 100.0, 99.5, 99.9, 0.0, 50.0, 0.0];
        let p = prominent_maxima(&v, 0.01);
        assert_eq!(p.iter().map(|p| p.index).collect::<Vec<_>>(), vec![1, 5]);
        assert!(prominent_maxima(&[0.0; 5], 0.01).is_empty());
    }

    #[test]
    fn split_between_two_pulses() {
        let v: Vec<f64> = (0..101)
            .map(|i| {
                let t = i as f64 - 50.0;
                (-(t + 20.0).powi(2) / 20.0).exp() + 0.8 * (-(t - 15.0).powi(2) / 20.0).exp()
            })
            .collect();
        let s = pulse_split_index(&v, 0.05).unwrap();
        assert!((40..=55).contains(&s), "{s}");
        assert!(pulse_split_index(&v[..40], 0.05).is_none());
    }
}
