//! Model structure, parameter values and the flat parameter layout.
//!
//! Flat ordering (used by chain files and summaries): every baseline
//! coefficient, type-major; then the branching matrix row-major; then the
//! kernel parameters row-major over `(m, j)`, where an exponential kernel
//! contributes `beta` and a gamma kernel contributes `shape` then `scale`.
//! Each tie group is collapsed into the slot of its smallest member.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Baseline descriptor for one event type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum BaselineSpec {
    Constant,
    /// Order-2 (piecewise linear) B-spline with interior `knots` on
    /// `(0, end)`. Coefficients are the rate values at `0, knots…, end`.
    #[serde(rename = "bspline")]
    BSpline { knots: Vec<f64>, end: f64 },
}

impl BaselineSpec {
    pub fn coefficient_count(&self) -> usize {
        match self {
            BaselineSpec::Constant => 1,
            BaselineSpec::BSpline { knots, .. } => knots.len() + 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Exponential,
    Gamma,
}

/// A reference to a parameter inside a tie group: either the full-layout
/// index or its name (`"beta[1,2]"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamClass {
    Nu,
    Eta,
    Beta,
    Shape,
    Scale,
}

impl ParamClass {
    /// Whether zero is an admissible value.
    pub fn allows_zero(self) -> bool {
        matches!(self, ParamClass::Nu | ParamClass::Eta)
    }
}

/// Where a flat slot lives inside a [`ParameterVector`]. Types are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Nu { ty: usize, coef: usize },
    Eta { m: usize, j: usize },
    Beta { m: usize, j: usize },
    Shape { m: usize, j: usize },
    Scale { m: usize, j: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSlot {
    pub name: String,
    pub class: ParamClass,
    pub location: Location,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelSpecDoc {
    dimension: usize,
    baselines: Vec<BaselineSpec>,
    kernels: Vec<Vec<KernelFamily>>,
    #[serde(default)]
    ties: Vec<Vec<ParamRef>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    fixed: Vec<FixedParam>,
}

/// A parameter held at a constant value and left out of the free vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedParam {
    pub parameter: ParamRef,
    pub value: f64,
}

/// Structure of a multivariate Hawkes model: dimension, baseline family per
/// type, kernel family per `(m, j)` pair and parameter ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpecDoc", into = "ModelSpecDoc")]
pub struct ModelSpec {
    dimension: usize,
    baselines: Vec<BaselineSpec>,
    kernels: Vec<Vec<KernelFamily>>,
    ties: Vec<Vec<usize>>,
    /// (full index, value), sorted by index
    fixed: Vec<(usize, f64)>,
    layout: Vec<ParamSlot>,
    /// full index -> free index, `usize::MAX` for fixed slots
    free_of_full: Vec<usize>,
    /// free index -> full indices sharing that slot
    members: Vec<Vec<usize>>,
}

impl TryFrom<ModelSpecDoc> for ModelSpec {
    type Error = Error;

    fn try_from(doc: ModelSpecDoc) -> Result<Self> {
        let layout = build_layout(doc.dimension, &doc.baselines, &doc.kernels)?;
        let ties = doc
            .ties
            .iter()
            .map(|group| {
                group
                    .iter()
                    .map(|r| resolve(&layout, r))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let fixed = doc
            .fixed
            .iter()
            .map(|f| Ok((resolve(&layout, &f.parameter)?, f.value)))
            .collect::<Result<Vec<_>>>()?;
        ModelSpec::with_layout(doc.dimension, doc.baselines, doc.kernels, ties, fixed, layout)
    }
}

impl From<ModelSpec> for ModelSpecDoc {
    fn from(spec: ModelSpec) -> Self {
        ModelSpecDoc {
            dimension: spec.dimension,
            baselines: spec.baselines,
            kernels: spec.kernels,
            ties: spec
                .ties
                .into_iter()
                .map(|g| {
                    g.into_iter()
                        .map(|i| ParamRef::Name(spec.layout[i].name.clone()))
                        .collect()
                })
                .collect(),
            fixed: spec
                .fixed
                .iter()
                .map(|&(i, value)| FixedParam {
                    parameter: ParamRef::Name(spec.layout[i].name.clone()),
                    value,
                })
                .collect(),
        }
    }
}

fn resolve(layout: &[ParamSlot], r: &ParamRef) -> Result<usize> {
    match r {
        ParamRef::Index(i) if *i < layout.len() => Ok(*i),
        ParamRef::Index(i) => Err(Error::InvalidInput(format!(
            "tie index {i} out of range (layout has {} slots)",
            layout.len()
        ))),
        ParamRef::Name(name) => layout
            .iter()
            .position(|s| s.name == *name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown parameter name {name:?}"))),
    }
}

fn build_layout(
    dimension: usize,
    baselines: &[BaselineSpec],
    kernels: &[Vec<KernelFamily>],
) -> Result<Vec<ParamSlot>> {
    if dimension == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    if baselines.len() != dimension {
        return Err(Error::InvalidInput(format!(
            "expected {dimension} baselines, got {}",
            baselines.len()
        )));
    }
    if kernels.len() != dimension || kernels.iter().any(|row| row.len() != dimension) {
        return Err(Error::InvalidInput(format!(
            "kernel families must form a {dimension}x{dimension} matrix"
        )));
    }
    for (ty, b) in baselines.iter().enumerate() {
        if let BaselineSpec::BSpline { knots, end } = b {
            if !(end.is_finite() && *end > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "baseline {}: spline end must be positive",
                    ty + 1
                )));
            }
            let inside = knots.iter().all(|&k| k > 0.0 && k < *end);
            let increasing = knots.windows(2).all(|w| w[0] < w[1]);
            if !inside || !increasing {
                return Err(Error::InvalidInput(format!(
                    "baseline {}: knots must be strictly increasing inside (0, {end})",
                    ty + 1
                )));
            }
        }
    }

    let mut layout = Vec::new();
    for (ty, b) in baselines.iter().enumerate() {
        let count = b.coefficient_count();
        for coef in 0..count {
            let name = if count == 1 {
                format!("nu[{}]", ty + 1)
            } else {
                format!("nu[{},{}]", ty + 1, coef + 1)
            };
            layout.push(ParamSlot {
                name,
                class: ParamClass::Nu,
                location: Location::Nu { ty, coef },
            });
        }
    }
    for m in 0..dimension {
        for j in 0..dimension {
            layout.push(ParamSlot {
                name: format!("eta[{},{}]", m + 1, j + 1),
                class: ParamClass::Eta,
                location: Location::Eta { m, j },
            });
        }
    }
    for m in 0..dimension {
        for j in 0..dimension {
            let tag = format!("[{},{}]", m + 1, j + 1);
            match kernels[m][j] {
                KernelFamily::Exponential => layout.push(ParamSlot {
                    name: format!("beta{tag}"),
                    class: ParamClass::Beta,
                    location: Location::Beta { m, j },
                }),
                KernelFamily::Gamma => {
                    layout.push(ParamSlot {
                        name: format!("shape{tag}"),
                        class: ParamClass::Shape,
                        location: Location::Shape { m, j },
                    });
                    layout.push(ParamSlot {
                        name: format!("scale{tag}"),
                        class: ParamClass::Scale,
                        location: Location::Scale { m, j },
                    });
                }
            }
        }
    }
    Ok(layout)
}

impl ModelSpec {
    /// Builds a spec; `ties` are groups of full-layout indices.
    pub fn new(
        dimension: usize,
        baselines: Vec<BaselineSpec>,
        kernels: Vec<Vec<KernelFamily>>,
        ties: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let layout = build_layout(dimension, &baselines, &kernels)?;
        Self::with_layout(dimension, baselines, kernels, ties, Vec::new(), layout)
    }

    /// Constant baselines and one kernel family everywhere, no ties.
    pub fn uniform(dimension: usize, family: KernelFamily) -> Result<Self> {
        Self::new(
            dimension,
            vec![BaselineSpec::Constant; dimension],
            vec![vec![family; dimension]; dimension],
            Vec::new(),
        )
    }

    /// Ties the kernel parameters of each row: `β_{m,1} = … = β_{m,M}`
    /// (and likewise for gamma shape/scale).
    pub fn with_row_tied_kernels(self) -> Result<Self> {
        let mut ties = self.ties.clone();
        for m in 0..self.dimension {
            for class in [ParamClass::Beta, ParamClass::Shape, ParamClass::Scale] {
                let group: Vec<usize> = self
                    .layout
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| {
                        s.class == class
                            && match s.location {
                                Location::Beta { m: r, .. }
                                | Location::Shape { m: r, .. }
                                | Location::Scale { m: r, .. } => r == m,
                                _ => false,
                            }
                    })
                    .map(|(i, _)| i)
                    .collect();
                if group.len() > 1 {
                    ties.push(group);
                }
            }
        }
        let layout = build_layout(self.dimension, &self.baselines, &self.kernels)?;
        Self::with_layout(self.dimension, self.baselines, self.kernels, ties, self.fixed, layout)
    }

    /// Holds the given full-layout slots at constant values. Replaces any
    /// earlier fixed set.
    pub fn with_fixed(self, fixed: Vec<(usize, f64)>) -> Result<Self> {
        Self::with_layout(self.dimension, self.baselines, self.kernels, self.ties, fixed, self.layout)
    }

    fn with_layout(
        dimension: usize,
        baselines: Vec<BaselineSpec>,
        kernels: Vec<Vec<KernelFamily>>,
        ties: Vec<Vec<usize>>,
        mut fixed: Vec<(usize, f64)>,
        layout: Vec<ParamSlot>,
    ) -> Result<Self> {
        let n = layout.len();
        let mut group_of = vec![None; n];
        let mut ties: Vec<Vec<usize>> = ties
            .into_iter()
            .map(|mut g| {
                g.sort_unstable();
                g
            })
            .filter(|g| !g.is_empty())
            .collect();
        ties.sort();
        for (gi, group) in ties.iter().enumerate() {
            if group.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInput("tie group repeats a parameter".into()));
            }
            for &i in group {
                if i >= n {
                    return Err(Error::InvalidInput(format!("tie index {i} out of range")));
                }
                if group_of[i].is_some() {
                    return Err(Error::InvalidInput(format!(
                        "parameter {} appears in two tie groups",
                        layout[i].name
                    )));
                }
                if layout[i].class != layout[group[0]].class {
                    return Err(Error::InvalidInput(format!(
                        "tie group mixes {} and {}",
                        layout[group[0]].name, layout[i].name
                    )));
                }
                group_of[i] = Some(gi);
            }
        }
        fixed.sort_by_key(|f| f.0);
        let mut is_fixed = vec![false; n];
        for &(i, value) in &fixed {
            if i >= n {
                return Err(Error::InvalidInput(format!("fixed index {i} out of range")));
            }
            if is_fixed[i] {
                return Err(Error::InvalidInput(format!("parameter {} fixed twice", layout[i].name)));
            }
            if group_of[i].is_some() {
                return Err(Error::InvalidInput(format!(
                    "parameter {} cannot be both tied and fixed",
                    layout[i].name
                )));
            }
            let ok = value.is_finite() && if layout[i].class.allows_zero() { value >= 0.0 } else { value > 0.0 };
            if !ok {
                return Err(Error::NonPositiveParameter {
                    name: layout[i].name.clone(),
                    value,
                });
            }
            is_fixed[i] = true;
        }
        let mut free_of_full = vec![usize::MAX; n];
        let mut members: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            if is_fixed[i] {
                continue;
            }
            match group_of[i] {
                Some(gi) if ties[gi][0] != i => {
                    free_of_full[i] = free_of_full[ties[gi][0]];
                    members[free_of_full[i]].push(i);
                }
                _ => {
                    free_of_full[i] = members.len();
                    members.push(vec![i]);
                }
            }
        }
        Ok(ModelSpec {
            dimension,
            baselines,
            kernels,
            ties,
            fixed,
            layout,
            free_of_full,
            members,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn baselines(&self) -> &[BaselineSpec] {
        &self.baselines
    }

    pub fn kernel_family(&self, m: usize, j: usize) -> KernelFamily {
        self.kernels[m][j]
    }

    pub fn all_exponential(&self) -> bool {
        self.kernels
            .iter()
            .flatten()
            .all(|&k| k == KernelFamily::Exponential)
    }

    pub fn ties(&self) -> &[Vec<usize>] {
        &self.ties
    }

    /// `(full index, value)` of every fixed slot.
    pub fn fixed(&self) -> &[(usize, f64)] {
        &self.fixed
    }

    /// Every parameter slot before tie collapsing.
    pub fn full_layout(&self) -> &[ParamSlot] {
        &self.layout
    }

    /// Number of free coordinates after tie collapsing and fixing.
    pub fn free_len(&self) -> usize {
        self.members.len()
    }

    /// Full-layout indices behind each free coordinate.
    pub fn free_members(&self, free: usize) -> &[usize] {
        &self.members[free]
    }

    pub fn free_class(&self, free: usize) -> ParamClass {
        self.layout[self.members[free][0]].class
    }

    pub fn free_names(&self) -> Vec<String> {
        self.members
            .iter()
            .map(|g| {
                g.iter()
                    .map(|&i| self.layout[i].name.as_str())
                    .collect::<Vec<_>>()
                    .join("=")
            })
            .collect()
    }

    /// Checks that `theta` has the shape this spec requires.
    pub fn check_shape(&self, theta: &ParameterVector) -> Result<()> {
        let d = self.dimension;
        let shape_err = |what: &str| Err(Error::InvalidInput(format!("parameter shape: {what}")));
        if theta.nu.len() != d {
            return shape_err("nu has the wrong number of types");
        }
        for (ty, b) in self.baselines.iter().enumerate() {
            if theta.nu[ty].len() != b.coefficient_count() {
                return shape_err(&format!(
                    "nu[{}] needs {} coefficients",
                    ty + 1,
                    b.coefficient_count()
                ));
            }
        }
        if theta.eta.len() != d || theta.eta.iter().any(|r| r.len() != d) {
            return shape_err("eta must be square of the model dimension");
        }
        if theta.kernels.len() != d || theta.kernels.iter().any(|r| r.len() != d) {
            return shape_err("kernels must be square of the model dimension");
        }
        for m in 0..d {
            for j in 0..d {
                let ok = matches!(
                    (self.kernels[m][j], &theta.kernels[m][j]),
                    (KernelFamily::Exponential, KernelParams::Exponential { .. })
                        | (KernelFamily::Gamma, KernelParams::Gamma { .. })
                );
                if !ok {
                    return shape_err(&format!("kernel ({}, {}) has the wrong family", m + 1, j + 1));
                }
            }
        }
        Ok(())
    }

    fn get(&self, theta: &ParameterVector, loc: Location) -> f64 {
        match loc {
            Location::Nu { ty, coef } => theta.nu[ty][coef],
            Location::Eta { m, j } => theta.eta[m][j],
            Location::Beta { m, j } => match theta.kernels[m][j] {
                KernelParams::Exponential { beta } => beta,
                _ => unreachable!("shape checked"),
            },
            Location::Shape { m, j } => match theta.kernels[m][j] {
                KernelParams::Gamma { shape, .. } => shape,
                _ => unreachable!("shape checked"),
            },
            Location::Scale { m, j } => match theta.kernels[m][j] {
                KernelParams::Gamma { scale, .. } => scale,
                _ => unreachable!("shape checked"),
            },
        }
    }

    fn set(&self, theta: &mut ParameterVector, loc: Location, value: f64) {
        match loc {
            Location::Nu { ty, coef } => theta.nu[ty][coef] = value,
            Location::Eta { m, j } => theta.eta[m][j] = value,
            Location::Beta { m, j } => theta.kernels[m][j] = KernelParams::Exponential { beta: value },
            Location::Shape { m, j } => {
                if let KernelParams::Gamma { shape, .. } = &mut theta.kernels[m][j] {
                    *shape = value;
                }
            }
            Location::Scale { m, j } => {
                if let KernelParams::Gamma { scale, .. } = &mut theta.kernels[m][j] {
                    *scale = value;
                }
            }
        }
    }

    /// All parameter values in full-layout order.
    pub fn to_full_flat(&self, theta: &ParameterVector) -> Result<Vec<f64>> {
        self.check_shape(theta)?;
        Ok(self.layout.iter().map(|s| self.get(theta, s.location)).collect())
    }

    pub fn from_full_flat(&self, values: &[f64]) -> Result<ParameterVector> {
        if values.len() != self.layout.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} values, got {}",
                self.layout.len(),
                values.len()
            )));
        }
        let mut theta = self.zero_parameters();
        for (slot, &v) in self.layout.iter().zip(values) {
            self.set(&mut theta, slot.location, v);
        }
        Ok(theta)
    }

    /// Free coordinates (one per tie group). Tied members must already be
    /// equal; the group's first member supplies the value.
    pub fn to_flat(&self, theta: &ParameterVector) -> Result<Vec<f64>> {
        let full = self.to_full_flat(theta)?;
        Ok(self.members.iter().map(|g| full[g[0]]).collect())
    }

    pub fn from_flat(&self, free: &[f64]) -> Result<ParameterVector> {
        if free.len() != self.free_len() {
            return Err(Error::InvalidInput(format!(
                "expected {} free values, got {}",
                self.free_len(),
                free.len()
            )));
        }
        let mut full: Vec<f64> = self
            .free_of_full
            .iter()
            .map(|&f| if f == usize::MAX { 0.0 } else { free[f] })
            .collect();
        for &(i, v) in &self.fixed {
            full[i] = v;
        }
        self.from_full_flat(&full)
    }

    /// Sum a gradient over the full layout into free coordinates.
    pub fn collapse_gradient(&self, full: &[f64]) -> Vec<f64> {
        self.members
            .iter()
            .map(|g| g.iter().map(|&i| full[i]).sum())
            .collect()
    }

    /// A correctly shaped parameter vector filled with zeros / unit kernel
    /// parameters, with fixed slots at their values.
    pub fn zero_parameters(&self) -> ParameterVector {
        let d = self.dimension;
        let mut theta = ParameterVector {
            nu: self
                .baselines
                .iter()
                .map(|b| vec![0.0; b.coefficient_count()])
                .collect(),
            eta: vec![vec![0.0; d]; d],
            kernels: self
                .kernels
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|f| match f {
                            KernelFamily::Exponential => KernelParams::Exponential { beta: 1.0 },
                            KernelFamily::Gamma => KernelParams::Gamma {
                                shape: 1.0,
                                scale: 1.0,
                            },
                        })
                        .collect()
                })
                .collect(),
        };
        for &(i, v) in &self.fixed {
            self.set(&mut theta, self.layout[i].location, v);
        }
        theta
    }

    pub fn slot_name(&self, full_index: usize) -> &str {
        &self.layout[full_index].name
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelParams {
    Exponential { beta: f64 },
    Gamma { shape: f64, scale: f64 },
}

/// Concrete parameter values. `nu[m]` holds one value for a constant
/// baseline or one per spline coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub nu: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
    pub kernels: Vec<Vec<KernelParams>>,
}

impl ParameterVector {
    /// Constant baselines with exponential kernels.
    pub fn exponential(nu: &[f64], eta: Vec<Vec<f64>>, beta: Vec<Vec<f64>>) -> Self {
        ParameterVector {
            nu: nu.iter().map(|&v| vec![v]).collect(),
            eta,
            kernels: beta
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|beta| KernelParams::Exponential { beta })
                        .collect()
                })
                .collect(),
        }
    }

    /// Constant baselines with gamma kernels.
    pub fn gamma(
        nu: &[f64],
        eta: Vec<Vec<f64>>,
        shape: Vec<Vec<f64>>,
        scale: Vec<Vec<f64>>,
    ) -> Self {
        ParameterVector {
            nu: nu.iter().map(|&v| vec![v]).collect(),
            eta,
            kernels: shape
                .into_iter()
                .zip(scale)
                .map(|(sr, cr)| {
                    sr.into_iter()
                        .zip(cr)
                        .map(|(shape, scale)| KernelParams::Gamma { shape, scale })
                        .collect()
                })
                .collect(),
        }
    }
}
