//! Flat parameter storage with named segments.
//!
//! Every learned component keeps its weights in one contiguous `Vec<f64>` so
//! that optimizers, gradient checks and checkpointing all work on plain slices.
//! A [`Layout`] records which `(component.tensor)` name lives at which offset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named, shaped view into a flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl Segment {
    pub fn size(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.size()
    }
}

/// Ordered segment table; offsets are contiguous and names unique.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    segments: Vec<Segment>,
}

impl Layout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a segment and returns its offset.
    ///
    /// Panics if `name` is already present.
    pub fn push(&mut self, name: impl Into<String>, shape: &[usize]) -> usize {
        let name = name.into();
        assert!(
            self.find(&name).is_none(),
            "duplicate parameter segment `{name}`"
        );
        let offset = self.len();
        self.segments.push(Segment {
            name,
            offset,
            shape: shape.to_vec(),
        });
        offset
    }

    pub fn len(&self) -> usize {
        self.segments.last().map_or(0, |s| s.offset + s.size())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn find(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    /// Segment holding flat index `index`.
    pub fn segment_of(&self, index: usize) -> Option<&Segment> {
        self.segments.iter().find(|s| s.range().contains(&index))
    }

    /// Checks the contiguity and uniqueness invariants.
    pub fn validate(&self) -> Result<()> {
        let mut expected = 0;
        for (i, s) in self.segments.iter().enumerate() {
            if s.offset != expected {
                return Err(Error::Validation(format!(
                    "segment `{}` at offset {} (expected {expected})",
                    s.name, s.offset
                )));
            }
            if self.segments[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::Validation(format!(
                    "duplicate segment `{}`",
                    s.name
                )));
            }
            expected += s.size();
        }
        Ok(())
    }
}

/// Flat vector of real parameters plus the layout describing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    layout: Layout,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: Layout) -> Self {
        let values = vec![0.0; layout.len()];
        Self { layout, values }
    }

    pub fn from_values(layout: Layout, values: Vec<f64>) -> Result<Self> {
        layout.validate()?;
        if values.len() != layout.len() {
            return Err(Error::dim("parameter values", layout.len(), values.len()));
        }
        Ok(Self { layout, values })
    }

    /// Single unnamed-shape segment, handy for ad hoc objectives.
    pub fn from_slice(name: &str, values: &[f64]) -> Self {
        let mut layout = Layout::new();
        layout.push(name, &[values.len()]);
        Self {
            layout,
            values: values.to_vec(),
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.layout.find(name).map(|s| &self.values[s.range()])
    }

    pub fn segment_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.layout.find(name)?.range();
        Some(&mut self.values[range])
    }

    /// Splits into `(name, shape, values)` triples in layout order.
    pub fn unflatten(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        self.layout
            .segments()
            .iter()
            .map(|s| (s.name.clone(), s.shape.clone(), self.values[s.range()].to_vec()))
            .collect()
    }

    /// Inverse of [`ParamVector::unflatten`].
    pub fn flatten(parts: Vec<(String, Vec<usize>, Vec<f64>)>) -> Result<Self> {
        let mut layout = Layout::new();
        let mut values = Vec::new();
        for (name, shape, v) in parts {
            let size: usize = shape.iter().product();
            if size != v.len() {
                return Err(Error::dim("segment values", size, v.len()));
            }
            if layout.find(&name).is_some() {
                return Err(Error::Validation(format!("duplicate segment `{name}`")));
            }
            layout.push(name, &shape);
            values.extend(v);
        }
        Ok(Self { layout, values })
    }

    /// Concatenates several vectors, prefixing each segment with `prefix.`.
    pub fn concat<'a>(parts: impl IntoIterator<Item = (&'a str, &'a ParamVector)>) -> Self {
        let mut layout = Layout::new();
        let mut values = Vec::new();
        for (prefix, pv) in parts {
            for s in pv.layout.segments() {
                layout.push(format!("{prefix}.{}", s.name), &s.shape);
            }
            values.extend_from_slice(&pv.values);
        }
        Self { layout, values }
    }

    /// Extracts the segments starting with `prefix.` as a standalone vector.
    pub fn extract(&self, prefix: &str) -> Option<Self> {
        let lead = format!("{prefix}.");
        let mut layout = Layout::new();
        let mut values = Vec::new();
        for s in self.layout.segments() {
            if let Some(rest) = s.name.strip_prefix(&lead) {
                layout.push(rest, &s.shape);
                values.extend_from_slice(&self.values[s.range()]);
            }
        }
        (!layout.is_empty()).then_some(Self { layout, values })
    }

    /// Returns an error naming the first segment holding a NaN or infinity.
    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::NonFinite {
                segment: self
                    .layout
                    .segment_of(i)
                    .map_or_else(|| "<unknown>".into(), |s| s.name.clone()),
            }),
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }
}
