use crate::diff::Tensor;
use crate::error::{Error, Result};

/// Keypoint features for `I` persons, `J` joints, `T` frames and `C` channels.
///
/// Channels are `(x, y)` or `(x, y, confidence)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    layout_id: String,
    data: Tensor,
    label: Option<usize>,
}

impl SkeletonSequence {
    pub fn new(layout_id: impl Into<String>, data: Tensor, label: Option<usize>) -> Result<Self> {
        if data.ndim() != 4 {
            return Err(Error::shape(format!(
                "skeleton data must be (I, J, T, C), got {:?}",
                data.shape()
            )));
        }
        let seq = SkeletonSequence {
            layout_id: layout_id.into(),
            data,
            label,
        };
        seq.validate()?;
        Ok(seq)
    }

    /// Single-person sequence from a `J×T×C` tensor.
    pub fn single(layout_id: impl Into<String>, data: Tensor, label: Option<usize>) -> Result<Self> {
        let mut shape = vec![1];
        shape.extend_from_slice(data.shape());
        Self::new(layout_id, data.reshaped(&shape)?, label)
    }

    fn validate(&self) -> Result<()> {
        if !self.data.is_finite() {
            return Err(Error::Numeric("non-finite keypoint coordinate".into()));
        }
        if self.channels() == 3 {
            if let Some(bad) = self
                .data
                .data()
                .chunks(3)
                .map(|p| p[2])
                .find(|c| !(0.0..=1.0).contains(c))
            {
                return Err(Error::Numeric(format!("confidence {bad} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn layout_id(&self) -> &str {
        &self.layout_id
    }

    pub fn data(&self) -> &Tensor {
        &self.data
    }

    pub fn into_data(self) -> Tensor {
        self.data
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn with_label(mut self, label: Option<usize>) -> Self {
        self.label = label;
        self
    }

    pub fn persons(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn joints(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn frames(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[3]
    }

    pub fn has_confidence(&self) -> bool {
        self.channels() >= 3
    }

    /// Channel vector of person `i`, joint `j`, frame `t`.
    pub fn point(&self, i: usize, j: usize, t: usize) -> &[f64] {
        let c = self.channels();
        let off = ((i * self.joints() + j) * self.frames() + t) * c;
        &self.data.data()[off..off + c]
    }

    /// `J×T×C` tensor of person `i`.
    pub fn person(&self, i: usize) -> Tensor {
        let inner = self.joints() * self.frames() * self.channels();
        let data = self.data.data()[i * inner..(i + 1) * inner].to_vec();
        Tensor::new(&self.data.shape()[1..], data).expect("person slice")
    }

    /// Keeps only the first `channels` channels (e.g. drops confidence).
    pub fn take_channels(&self, channels: usize) -> Result<Self> {
        let c = self.channels();
        if channels == 0 || channels > c {
            return Err(Error::shape(format!(
                "cannot keep {channels} of {c} channels"
            )));
        }
        let data = self
            .data
            .data()
            .chunks(c)
            .flat_map(|p| p[..channels].iter().copied())
            .collect();
        let mut shape = self.data.shape().to_vec();
        shape[3] = channels;
        Self::new(self.layout_id.clone(), Tensor::new(&shape, data)?, self.label)
    }
}
