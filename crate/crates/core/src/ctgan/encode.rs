//! Encoded representation of a table row for the generator and discriminator.
//!
//! Columns are the feature columns followed by the label. A continuous
//! column becomes `[alpha, one-hot mode]` with `alpha = (v - mu) / (4 sigma)`
//! clipped to `[-1, 1]`; a discrete column becomes a one-hot block.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::gmm::GmmNormalizer;
use crate::error::{bail, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpanKind {
    Continuous { modes: usize },
    Discrete { levels: usize },
}

/// Where one table column lives inside an encoded row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub column: usize,
    pub start: usize,
    pub kind: SpanKind,
}

impl Span {
    pub fn width(&self) -> usize {
        match self.kind {
            SpanKind::Continuous { modes } => 1 + modes,
            SpanKind::Discrete { levels } => levels,
        }
    }

    /// Range of the one-hot block (modes for continuous columns).
    pub fn one_hot(&self) -> core::ops::Range<usize> {
        match self.kind {
            SpanKind::Continuous { modes } => self.start + 1..self.start + 1 + modes,
            SpanKind::Discrete { levels } => self.start..self.start + levels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedLayout {
    pub spans: Vec<Span>,
    pub width: usize,
}

/// Normalizer for each table column; `None` for discrete columns.
pub type Normalizers = [Option<GmmNormalizer>];

impl EncodedLayout {
    /// `levels[c]` is `None` for continuous columns.
    pub fn new(levels: &[Option<usize>], normalizers: &Normalizers) -> Result<Self> {
        if levels.len() != normalizers.len() {
            bail!(
                Shape,
                "{} columns but {} normalizer slots",
                levels.len(),
                normalizers.len()
            );
        }
        let mut spans = Vec::with_capacity(levels.len());
        let mut start = 0;
        for (column, (lv, norm)) in levels.iter().zip(normalizers).enumerate() {
            let kind = match (lv, norm) {
                (None, Some(g)) => SpanKind::Continuous { modes: g.n_modes() },
                (Some(l), None) => SpanKind::Discrete { levels: *l },
                _ => bail!(
                    Schema,
                    "column {column}: normalizer presence does not match its kind"
                ),
            };
            let span = Span {
                column,
                start,
                kind,
            };
            start += span.width();
            spans.push(span);
        }
        Ok(Self {
            spans,
            width: start,
        })
    }
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
}

/// Encodes one table row into `out`. With `rng` the mode of each continuous
/// value is drawn from its posterior; without, the most likely mode is used.
pub fn encode_row(
    row: &[f64],
    normalizers: &Normalizers,
    layout: &EncodedLayout,
    out: &mut [f64],
    mut rng: Option<&mut Rng>,
) -> Result<()> {
    if row.len() != layout.spans.len() || out.len() != layout.width {
        bail!(
            Shape,
            "row of {} into layout of {} columns / width {}",
            row.len(),
            layout.spans.len(),
            layout.width
        );
    }
    out.iter_mut().for_each(|v| *v = 0.0);
    for span in &layout.spans {
        let v = row[span.column];
        match span.kind {
            SpanKind::Continuous { .. } => {
                let g = normalizers[span.column]
                    .as_ref()
                    .expect("continuous span has a normalizer");
                let m = match rng.as_deref_mut() {
                    Some(r) => {
                        let resp = g.responsibilities(v);
                        let mut u = r.random::<f64>();
                        let mut pick = resp.len() - 1;
                        for (i, p) in resp.iter().enumerate() {
                            if u < *p {
                                pick = i;
                                break;
                            }
                            u -= p;
                        }
                        pick
                    }
                    None => g.most_likely_mode(v),
                };
                out[span.start] = ((v - g.means[m]) / (4.0 * g.stds[m])).clamp(-1.0, 1.0);
                out[span.start + 1 + m] = 1.0;
            }
            SpanKind::Discrete { levels } => {
                let code = v as usize;
                if v < 0.0 || code >= levels || code as f64 != v {
                    bail!(Schema, "value {v} is not a level of column {}", span.column);
                }
                out[span.start + code] = 1.0;
            }
        }
    }
    Ok(())
}

pub fn encode_rows(
    rows: impl Iterator<Item = impl AsRef<[f64]>>,
    normalizers: &Normalizers,
    layout: &EncodedLayout,
    mut rng: Option<&mut Rng>,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut buf = vec![0.0; layout.width];
    for row in rows {
        encode_row(
            row.as_ref(),
            normalizers,
            layout,
            &mut buf,
            rng.as_deref_mut(),
        )?;
        out.extend_from_slice(&buf);
    }
    Ok(out)
}

/// Inverse of [`encode_row`], taking the argmax of every one-hot block.
pub fn decode_row(
    encoded: &[f64],
    normalizers: &Normalizers,
    layout: &EncodedLayout,
) -> Result<Vec<f64>> {
    if encoded.len() != layout.width {
        bail!(
            Shape,
            "encoded width {} but layout width {}",
            encoded.len(),
            layout.width
        );
    }
    let mut row = vec![0.0; layout.spans.len()];
    for span in &layout.spans {
        let mode = argmax(&encoded[span.one_hot()]);
        row[span.column] = match span.kind {
            SpanKind::Continuous { .. } => {
                let g = normalizers[span.column]
                    .as_ref()
                    .expect("continuous span has a normalizer");
                let alpha = encoded[span.start].clamp(-1.0, 1.0);
                alpha * 4.0 * g.stds[mode] + g.means[mode]
            }
            SpanKind::Discrete { .. } => mode as f64,
        };
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctgan::gmm::fit_normalizer;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, Normal};

    fn setup() -> (Vec<Option<GmmNormalizer>>, EncodedLayout) {
        let mut rng = rng_from_seed(3);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let a: Vec<f64> = (0..1000)
            .map(|i| normal.sample(&mut rng) + if i % 2 == 0 { 6.0 } else { -6.0 })
            .collect();
        let b: Vec<f64> = (0..1000)
            .map(|_| 2.0 * normal.sample(&mut rng) + 1.0)
            .collect();
        let norms = vec![
            Some(fit_normalizer(&a, 5, 100, 1).unwrap()),
            None,
            Some(fit_normalizer(&b, 5, 100, 2).unwrap()),
            None,
        ];
        let layout = EncodedLayout::new(&[None, Some(4), None, Some(2)], &norms).unwrap();
        (norms, layout)
    }

    #[test]
    fn round_trip_preserves_rows() {
        let (norms, layout) = setup();
        let mut rng = rng_from_seed(9);
        let mut buf = vec![0.0; layout.width];
        for _ in 0..1000 {
            // values within 3 sigma of a generating mode, so no clipping
            let row = [
                rng.random_range(-3.0..3.0) + if rng.random::<bool>() { 6.0 } else { -6.0 },
                rng.random_range(0..4) as f64,
                rng.random_range(-5.0..7.0),
                rng.random_range(0..2) as f64,
            ];
            encode_row(&row, &norms, &layout, &mut buf, None).unwrap();
            let back = decode_row(&buf, &norms, &layout).unwrap();
            assert!((back[0] - row[0]).abs() < 1e-6 && (back[2] - row[2]).abs() < 1e-6);
            assert_eq!((back[1], back[3]), (row[1], row[3]));
        }
    }

    #[test]
    fn mode_mean_encodes_to_zero() {
        let (norms, layout) = setup();
        let g = norms[0].as_ref().unwrap();
        let mut buf = vec![0.0; layout.width];
        for m in 0..g.n_modes() {
            let row = [g.means[m], 0.0, 1.0, 0.0];
            encode_row(&row, &norms, &layout, &mut buf, None).unwrap();
            assert_eq!(buf[0], 0.0);
            assert_eq!(buf[1 + m], 1.0);
        }
    }

    #[test]
    fn far_tail_clips() {
        let g = GmmNormalizer {
            means: vec![2.0],
            stds: vec![0.5],
            weights: vec![1.0],
            log_likelihood: vec![],
        };
        let norms = vec![Some(g)];
        let layout = EncodedLayout::new(&[None], &norms).unwrap();
        let mut buf = vec![0.0; 2];
        encode_row(&[2.0 + 10.0 * 0.5], &norms, &layout, &mut buf, None).unwrap();
        assert_eq!(buf[0], 1.0);
        assert_eq!(
            decode_row(&buf, &norms, &layout).unwrap(),
            vec![2.0 + 4.0 * 0.5]
        );
    }

    #[test]
    fn width_mismatch() {
        let (norms, layout) = setup();
        assert!(matches!(
            decode_row(&[0.0; 3], &norms, &layout),
            Err(crate::Error::Shape(_))
        ));
    }
}
