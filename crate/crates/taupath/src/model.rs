//! Reaction network model: species, parameters, reactions with expression
//! propensities, observable, and the text format they are read from.
//!
//! A model file is line oriented, `#` starts a comment:
//!
//! ```text
//! species: X
//! param theta1 = 10
//! param theta2 = 0.1
//! reaction:  -> X @ theta1
//! reaction: X ->  @ theta2*X
//! observable: X
//! init: 0
//! ```
//!
//! Reaction sides are `+`-separated species with optional integer
//! multiplicities (`2 X + Y`); an empty side is the empty set. The state
//! change vector of a reaction is products minus reactants.

mod expr;
mod parse;

pub use expr::{EvalError, Expr};
pub use parse::ModelError;

/// Species counts. Kept unsigned so a state can never hold a negative copy
/// number; updates clamp at zero (see [`apply_stoichiometry`]).
pub type State = Vec<u64>;

/// A parameter declaration: name and the value given in the model file.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
}

/// One reaction channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    /// (species index, multiplicity) pairs on the left side.
    pub reactants: Vec<(usize, u64)>,
    /// (species index, multiplicity) pairs on the right side.
    pub products: Vec<(usize, u64)>,
    /// State change vector: products minus reactants, one entry per species.
    pub delta: Vec<i64>,
    /// Propensity expression.
    pub propensity: Expr,
}

/// A validated reaction network. Immutable after parsing; shared freely
/// across simulation workers.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    pub species: Vec<String>,
    pub parameters: Vec<Parameter>,
    pub reactions: Vec<Reaction>,
    pub observable: Expr,
    pub init: State,
}

/// Concrete parameter values aligned with a network's declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    values: Vec<f64>,
}

impl ParameterSet {
    /// Parameter values as declared in the model file.
    pub fn from_network(net: &ReactionNetwork) -> Self {
        ParameterSet {
            values: net.parameters.iter().map(|p| p.value).collect(),
        }
    }

    /// Returns a copy with the parameter at `index` replaced by `value`.
    pub fn with_value(&self, index: usize, value: f64) -> Self {
        let mut values = self.values.clone();
        values[index] = value;
        ParameterSet { values }
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl ReactionNetwork {
    /// Parses and validates a model file; see the module docs for the format.
    pub fn parse(text: &str) -> Result<ReactionNetwork, ModelError> {
        parse::parse_model(text)
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn parameter_index(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.name == name)
    }

    pub fn num_reactions(&self) -> usize {
        self.reactions.len()
    }

    /// Evaluates the observable f at a state.
    pub fn observe(&self, state: &[u64], params: &ParameterSet) -> Result<f64, EvalError> {
        self.observable.eval(state, params.values())
    }

    /// Evaluates the propensity of reaction `k`, enforcing the runtime
    /// contract that propensities are finite and non-negative.
    pub fn propensity(
        &self,
        k: usize,
        state: &[u64],
        params: &ParameterSet,
    ) -> Result<f64, PropensityError> {
        let v = self.reactions[k]
            .propensity
            .eval(state, params.values())
            .map_err(|source| PropensityError::Eval { reaction: k, source })?;
        if v < 0.0 {
            return Err(PropensityError::Negative { reaction: k, value: v });
        }
        Ok(v)
    }

    /// Evaluates all propensities into `out` and returns their sum.
    pub fn propensities(
        &self,
        state: &[u64],
        params: &ParameterSet,
        out: &mut [f64],
    ) -> Result<f64, PropensityError> {
        let mut total = 0.0;
        for (k, slot) in out.iter_mut().enumerate() {
            let v = self.propensity(k, state, params)?;
            *slot = v;
            total += v;
        }
        Ok(total)
    }

    /// Symbolic derivatives of every propensity with respect to the
    /// parameter at `theta`, with identically-zero channels recorded so
    /// kernels can skip them.
    pub fn propensity_derivatives(&self, theta: usize) -> PropensityDerivatives {
        let exprs: Vec<Expr> = self
            .reactions
            .iter()
            .map(|r| r.propensity.derivative(theta))
            .collect();
        let sensitive: Vec<usize> = exprs
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.is_zero())
            .map(|(k, _)| k)
            .collect();
        PropensityDerivatives { theta, exprs, sensitive }
    }

    /// Writes the network back out in the model file format. Reparsing the
    /// result yields a network with the same state change vectors and
    /// propensity values.
    pub fn to_model_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "species: {}", self.species.join(" "));
        for p in &self.parameters {
            let _ = writeln!(out, "param {} = {}", p.name, p.value);
        }
        let names: Vec<String> = self.parameters.iter().map(|p| p.name.clone()).collect();
        for r in &self.reactions {
            let _ = writeln!(
                out,
                "reaction: {} -> {} @ {}",
                render_side(&r.reactants, &self.species),
                render_side(&r.products, &self.species),
                r.propensity.render(&self.species, &names)
            );
        }
        let _ = writeln!(out, "observable: {}", self.observable.render(&self.species, &names));
        let init: Vec<String> = self.init.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "init: {}", init.join(" "));
        out
    }
}

fn render_side(side: &[(usize, u64)], species: &[String]) -> String {
    let terms: Vec<String> = side
        .iter()
        .map(|(i, m)| {
            if *m == 1 {
                species[*i].clone()
            } else {
                format!("{} {}", m, species[*i])
            }
        })
        .collect();
    terms.join(" + ")
}

/// Error from evaluating a propensity at a concrete state.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PropensityError {
    #[error("propensity of reaction {reaction} failed to evaluate: {source}")]
    Eval {
        reaction: usize,
        #[source]
        source: EvalError,
    },
    #[error("propensity of reaction {reaction} is negative ({value})")]
    Negative { reaction: usize, value: f64 },
}

/// Per-parameter propensity derivatives, computed once per estimation run.
#[derive(Debug, Clone)]
pub struct PropensityDerivatives {
    pub theta: usize,
    exprs: Vec<Expr>,
    /// Reaction indices whose derivative is not identically zero.
    sensitive: Vec<usize>,
}

impl PropensityDerivatives {
    pub fn eval(
        &self,
        k: usize,
        state: &[u64],
        params: &ParameterSet,
    ) -> Result<f64, EvalError> {
        if self.exprs[k].is_zero() {
            return Ok(0.0);
        }
        self.exprs[k].eval(state, params.values())
    }

    /// Reactions with a not-identically-zero derivative.
    pub fn sensitive_reactions(&self) -> &[usize] {
        &self.sensitive
    }

    pub fn expr(&self, k: usize) -> &Expr {
        &self.exprs[k]
    }
}

/// Applies `count` firings of a state change vector, clamping any component
/// that would go negative to zero. Returns the number of clamped components.
pub fn apply_stoichiometry(state: &mut State, delta: &[i64], count: u64) -> u32 {
    if count == 0 {
        return 0;
    }
    let mut clamped = 0;
    for (x, d) in state.iter_mut().zip(delta) {
        if *d == 0 {
            continue;
        }
        let moved = (*x as i128) + (*d as i128) * (count as i128);
        if moved < 0 {
            *x = 0;
            clamped += 1;
        } else {
            *x = moved as u64;
        }
    }
    clamped
}
