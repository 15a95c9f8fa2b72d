//! Distributed proximal SGD with quantized gradient differences (DIANA).
//!
//! - [`quantize`]: block p-quantization, moments, `α_p` and the wire codec.
//! - [`prox`]: regularizers and their proximal operators.
//! - [`problems`]: objectives split across workers.
//! - [`optimizer`]: DIANA, the memoryless baseline and the run loop.
//! - [`theory`]: parameter choices and convergence bounds.
//! - [`simnet`]: simulated parameter-server bit accounting.

pub mod error;
pub mod optimizer;
pub mod problems;
pub mod prox;
pub mod quantize;
pub mod rng;
pub mod simnet;
pub mod theory;

pub use error::{Error, Result};
pub use optimizer::{
    baseline_step, diana_step, init_states, lyapunov, run, run_with, DianaConfig, Method,
    RunOptions, RunRecord, Runner, Schedule, ServerState, StepTelemetry, WorkerState,
};
pub use problems::{Problem, ProblemConstants};
pub use prox::Regularizer;
pub use quantize::{BlockLayout, PNorm, QuantizedVector};
