/// Hops × facts matrix of gate values for one sample, row-major by hop.
#[derive(Clone, Debug, PartialEq)]
pub struct GateTrace {
    hops: usize,
    facts: usize,
    values: Vec<f64>,
}

impl GateTrace {
    pub fn new(hops: usize, facts: usize) -> Self {
        GateTrace { hops, facts, values: vec![0.0; hops * facts] }
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn facts(&self) -> usize {
        self.facts
    }

    pub fn get(&self, hop: usize, fact: usize) -> f64 {
        self.values[hop * self.facts + fact]
    }

    pub fn set(&mut self, hop: usize, fact: usize, value: f64) {
        self.values[hop * self.facts + fact] = value;
    }

    pub fn row(&self, hop: usize) -> &[f64] {
        &self.values[hop * self.facts..(hop + 1) * self.facts]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.hops).map(move |h| self.row(h))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}
