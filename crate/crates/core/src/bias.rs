/// Bias value marking an item as excluded from every recommendation list.
///
/// Finite so that arithmetic on it stays well defined.
pub const NEG_INF: f64 = -1.0e18;

pub fn is_excluded(bias: f64) -> bool {
    bias <= NEG_INF
}

/// Dense per-item additive biases.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasVector {
    values: Vec<f64>,
}

impl BiasVector {
    pub fn zeros(n_items: usize) -> Self {
        Self {
            values: vec![0.0; n_items],
        }
    }

    /// Builds a vector from raw values, clamping anything at or below the
    /// sentinel (including `-inf`) to [`NEG_INF`].
    pub fn from_values(values: Vec<f64>) -> Self {
        let values = values
            .into_iter()
            .map(|b| if b <= NEG_INF { NEG_INF } else { b })
            .collect();
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, item: u32) -> f64 {
        self.values[item as usize]
    }

    pub fn set(&mut self, item: u32, bias: f64) {
        self.values[item as usize] = if bias <= NEG_INF { NEG_INF } else { bias };
    }

    pub fn exclude(&mut self, item: u32) {
        self.values[item as usize] = NEG_INF;
    }

    pub fn is_excluded(&self, item: u32) -> bool {
        is_excluded(self.values[item as usize])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Number of items whose bias is non-zero (sentinel included).
    pub fn non_zero(&self) -> usize {
        self.values.iter().filter(|&&b| b != 0.0).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &b)| (i as u32, b))
    }
}
