//! Versioned JSON archives for profiles and branches, plus CSV emitters.
//!
//! Archives are deterministic: field order is fixed by the structs, floats
//! round-trip exactly through serde_json's shortest representation, and no
//! timestamps are stored, so saving a loaded archive reproduces the file
//! byte for byte.

use anyhow::{anyhow, bail, Context, Result};
use pme4_core::collocation::BvpSolution;
use pme4_core::continuation::{Branch, BranchParameter, BranchPoint, Termination};
use pme4_core::mesh::Mesh;
use pme4_core::multiindex::MultiIndex;
use pme4_core::params::ProblemParams;
use pme4_core::profiles::{
    build_system, ProfileForm, ProfileProblemSpec, ProfileSolution, RightBc,
};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const PROFILE_SCHEMA_VERSION: u32 = 1;
pub const BRANCH_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct ParamsDto {
    pub n: f64,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub nu_var: f64,
    pub regime: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProblemDto {
    pub form: String,
    pub symmetry: String,
    pub right_bc: String,
    pub radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub tail_threshold: f64,
    pub max_nodes: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TolerancesDto {
    pub rtol: f64,
    pub atol: f64,
    pub eps: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProvenanceDto {
    pub command: String,
    pub tolerances: TolerancesDto,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProfileArchive {
    pub version: u32,
    pub params: ParamsDto,
    pub eps: f64,
    pub problem: ProblemDto,
    pub mesh: Vec<f64>,
    #[serde(rename = "F")]
    pub f: Vec<f64>,
    #[serde(rename = "dF")]
    pub df: Vec<f64>,
    #[serde(rename = "d2F")]
    pub d2f: Vec<f64>,
    #[serde(rename = "d3F")]
    pub d3f: Vec<f64>,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
    pub provenance: ProvenanceDto,
}

fn form_str(form: ProfileForm) -> &'static str {
    form.as_str()
}

fn parse_form(s: &str) -> Result<ProfileForm> {
    Ok(match s {
        "f-profile" => ProfileForm::FProfile,
        "s" => ProfileForm::SRegime,
        "general" => ProfileForm::General,
        "normalized" => ProfileForm::Normalized,
        "sign-limit" => ProfileForm::SignLimit,
        other => bail!("unknown profile form '{other}'"),
    })
}

fn parse_symmetry(s: &str) -> Result<pme4_core::profiles::Symmetry> {
    Ok(match s {
        "even" => pme4_core::profiles::Symmetry::Even,
        "odd" => pme4_core::profiles::Symmetry::Odd,
        other => bail!("unknown symmetry '{other}'"),
    })
}

fn parse_right_bc(s: &str) -> Result<RightBc> {
    Ok(match s {
        "compact" => RightBc::CompactSupport,
        "farfield" => RightBc::FarFieldAsymptotic,
        other => bail!("unknown right boundary condition '{other}'"),
    })
}

impl ProfileArchive {
    pub fn from_solution(sol: &ProfileSolution, command: String) -> Self {
        let spec = &sol.spec;
        ProfileArchive {
            version: PROFILE_SCHEMA_VERSION,
            params: ParamsDto {
                n: spec.params.n,
                p: spec.params.p,
                alpha: spec.params.alpha,
                beta: spec.params.beta,
                nu_var: spec.params.nu_var,
                regime: spec.params.regime.as_str().to_string(),
            },
            eps: spec.eps,
            problem: ProblemDto {
                form: form_str(spec.form).to_string(),
                symmetry: match spec.symmetry {
                    pme4_core::profiles::Symmetry::Even => "even".into(),
                    pme4_core::profiles::Symmetry::Odd => "odd".into(),
                },
                right_bc: match spec.right_bc {
                    RightBc::CompactSupport => "compact".into(),
                    RightBc::FarFieldAsymptotic => "farfield".into(),
                },
                radius: spec.radius,
                mu: spec.mu_override,
                tail_threshold: spec.tail_threshold,
                max_nodes: spec.max_nodes,
            },
            mesh: sol.bvp.mesh.nodes().to_vec(),
            f: sol.bvp.component(0),
            df: sol.bvp.component(1),
            d2f: sol.bvp.component(2),
            d3f: sol.bvp.component(3),
            residual: sol.residual,
            y0: sol.y0,
            zero_count: sol.zero_count,
            sigma: sol.sigma.as_ref().map(|s| s.notation()),
            provenance: ProvenanceDto {
                command,
                tolerances: TolerancesDto {
                    rtol: sol.tol,
                    atol: sol.tol,
                    eps: spec.eps,
                },
            },
        }
    }

    /// Rebuild the in-memory solution.  Node right-hand sides and condensed
    /// midpoints are derived data and are reconstructed from the equations.
    pub fn into_solution(self) -> Result<ProfileSolution> {
        if self.version != PROFILE_SCHEMA_VERSION {
            bail!(
                "profile archive schema version {} unsupported (expected {})",
                self.version,
                PROFILE_SCHEMA_VERSION
            );
        }
        let params = ProblemParams::new(self.params.n, self.params.p)
            .map_err(|e| anyhow!("{e}"))?;
        let expect_regime = params.regime;
        if expect_regime.as_str() != self.params.regime {
            bail!(
                "archive regime '{}' disagrees with (n, p) classification '{}'",
                self.params.regime,
                expect_regime.as_str()
            );
        }
        let spec = ProfileProblemSpec {
            params,
            form: parse_form(&self.problem.form)?,
            symmetry: parse_symmetry(&self.problem.symmetry)?,
            radius: self.problem.radius,
            eps: self.eps,
            right_bc: parse_right_bc(&self.problem.right_bc)?,
            mu_override: self.problem.mu,
            tail_threshold: self.problem.tail_threshold,
            max_nodes: self.problem.max_nodes,
        };
        let n_nodes = self.mesh.len();
        if self.f.len() != n_nodes
            || self.df.len() != n_nodes
            || self.d2f.len() != n_nodes
            || self.d3f.len() != n_nodes
        {
            bail!("archive arrays disagree with the mesh length");
        }
        let mesh = Mesh::new(self.mesh, spec.max_nodes.max(n_nodes)).map_err(|e| anyhow!("{e}"))?;
        let mut states = Vec::with_capacity(4 * n_nodes);
        for i in 0..n_nodes {
            states.extend_from_slice(&[self.f[i], self.df[i], self.d2f[i], self.d3f[i]]);
        }
        let problem = build_system(&spec).map_err(|e| anyhow!("{e}"))?;
        let mut f_nodes = vec![0.0; 4 * n_nodes];
        for i in 0..n_nodes {
            let (lo, hi) = (4 * i, 4 * i + 4);
            (problem.rhs)(mesh.nodes()[i], &states[lo..hi], &mut f_nodes[lo..hi]);
        }
        let mut y_mid = Vec::with_capacity(4 * (n_nodes - 1));
        for i in 0..n_nodes - 1 {
            let h = mesh.nodes()[i + 1] - mesh.nodes()[i];
            for c in 0..4 {
                y_mid.push(
                    0.5 * (states[4 * i + c] + states[4 * (i + 1) + c])
                        - h / 8.0 * (f_nodes[4 * (i + 1) + c] - f_nodes[4 * i + c]),
                );
            }
        }
        let rtol = self.provenance.tolerances.rtol;
        let bvp = BvpSolution {
            dim: 4,
            mesh,
            states,
            f_nodes,
            y_mid,
            residual: self.residual,
            newton_iterations: 0,
            rtol,
            atol: self.provenance.tolerances.atol,
        };
        let sigma = match self.sigma {
            Some(s) => Some(
                MultiIndex::parse(&s, spec.tail_threshold)
                    .ok_or_else(|| anyhow!("invalid multiindex '{s}'"))?,
            ),
            None => None,
        };
        Ok(ProfileSolution {
            spec,
            bvp,
            residual: self.residual,
            tol: rtol,
            y0: self.y0,
            zero_count: self.zero_count,
            sigma,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchPointDto {
    pub param: f64,
    #[serde(rename = "F0_at_origin")]
    pub f0_at_origin: f64,
    pub sup_norm: f64,
    pub l2_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution_path: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BranchArchive {
    pub version: u32,
    pub parameter_name: String,
    pub n: f64,
    pub termination: String,
    pub points: Vec<BranchPointDto>,
    pub provenance: ProvenanceDto,
}

impl BranchArchive {
    pub fn from_branch(branch: &Branch, n: f64, command: String, tol: f64, eps: f64) -> Self {
        BranchArchive {
            version: BRANCH_SCHEMA_VERSION,
            parameter_name: branch.parameter.as_str().to_string(),
            n,
            termination: branch.termination.as_str().to_string(),
            points: branch
                .points
                .iter()
                .map(|p| BranchPointDto {
                    param: p.param,
                    f0_at_origin: p.f0_at_origin,
                    sup_norm: p.sup_norm,
                    l2_norm: p.l2_norm,
                    y0: p.y0,
                    sigma: p.sigma.as_ref().map(|s| s.notation()),
                    solution_path: p.solution_path.clone(),
                })
                .collect(),
            provenance: ProvenanceDto {
                command,
                tolerances: TolerancesDto {
                    rtol: tol,
                    atol: tol,
                    eps,
                },
            },
        }
    }

    pub fn parameter(&self) -> Result<BranchParameter> {
        Ok(match self.parameter_name.as_str() {
            "p" => BranchParameter::P,
            "mu" => BranchParameter::Mu,
            "eps" => BranchParameter::Eps,
            other => bail!("unknown branch parameter '{other}'"),
        })
    }

    pub fn into_branch(&self) -> Result<Branch> {
        let termination = match self.termination.as_str() {
            "range_end" => Termination::RangeEnd,
            "newton_failure" => Termination::NewtonFailure,
            "jump_detected" => Termination::JumpDetected,
            "singularity" => Termination::Singularity,
            other => bail!("unknown termination '{other}'"),
        };
        Ok(Branch {
            parameter: self.parameter()?,
            termination,
            points: self
                .points
                .iter()
                .map(|p| {
                    Ok(BranchPoint {
                        param: p.param,
                        f0_at_origin: p.f0_at_origin,
                        sup_norm: p.sup_norm,
                        l2_norm: p.l2_norm,
                        y0: p.y0,
                        sigma: match &p.sigma {
                            Some(s) => Some(
                                MultiIndex::parse(s, 1e-4)
                                    .ok_or_else(|| anyhow!("invalid multiindex '{s}'"))?,
                            ),
                            None => None,
                        },
                        solution_path: p.solution_path.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        })
    }
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn load_profile(path: &Path) -> Result<ProfileSolution> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let archive: ProfileArchive =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    archive.into_solution()
}

pub fn load_profile_archive(path: &Path) -> Result<ProfileArchive> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
}

pub fn load_branch(path: &Path) -> Result<BranchArchive> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
}

/// Detect whether a JSON file holds a profile or a branch archive.
pub fn sniff_kind(path: &Path) -> Result<&'static str> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("points").is_some() {
        Ok("branch")
    } else if value.get("mesh").is_some() {
        Ok("profile")
    } else {
        bail!("{} is neither a profile nor a branch archive", path.display())
    }
}

/// Full-precision decimal float for CSV output (17 significant digits).
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Profile CSV: `y,F,dF,d2F,d3F` rows at the mesh nodes.
pub fn profile_csv(sol: &ProfileSolution) -> String {
    let mut out = String::from("y,F,dF,d2F,d3F\n");
    let nodes = sol.bvp.mesh.nodes();
    for (i, &y) in nodes.iter().enumerate() {
        let st = sol.bvp.state(i);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_float(y),
            csv_float(st[0]),
            csv_float(st[1]),
            csv_float(st[2]),
            csv_float(st[3])
        ));
    }
    out
}

/// Log-scale interface CSV: `log10(y0-y),log10|F|` over the tail.
pub fn log_interface_csv(sol: &ProfileSolution, y0: f64, samples: usize) -> String {
    let mut out = String::from("log10_y0_minus_y,log10_absF\n");
    let y_start = 0.0f64.max(y0 - 0.98 * y0.min(sol.spec.radius));
    for j in 0..samples {
        // Log-spaced approach to the interface.
        let t = j as f64 / (samples - 1) as f64;
        let dist = (y0 - y_start) * 10f64.powf(-4.0 * t);
        let y = y0 - dist;
        if y < 0.0 || y > sol.spec.radius {
            continue;
        }
        let f = sol.eval_f(y).abs();
        if f > 0.0 {
            out.push_str(&format!("{},{}\n", csv_float(dist.log10()), csv_float(f.log10())));
        }
    }
    out
}

/// Branch CSV: one row per accepted point.
pub fn branch_csv(archive: &BranchArchive) -> String {
    let mut out = String::from("param,F0_at_origin,sup_norm,l2_norm,y0,sigma\n");
    for p in &archive.points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            csv_float(p.param),
            csv_float(p.f0_at_origin),
            csv_float(p.sup_norm),
            csv_float(p.l2_norm),
            p.y0.map(csv_float).unwrap_or_default(),
            p.sigma.clone().unwrap_or_default()
        ));
    }
    out
}
