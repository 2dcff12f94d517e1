use std::fs;

use super::{
    Capture, CaptureJob, CoverageReport, ExecError, ExecStatus, ExecutionOutcome, Runner, TestJob,
    TestRun,
};

/// What a [`FakeRunner`] sees of one execution.
#[derive(Debug, Clone, Copy)]
pub struct FakeCall<'a> {
    /// The module under test as it exists in the run directory.
    pub module_source: &'a str,
    pub test_source: &'a str,
    /// Zero-based repetition index.
    pub run: u32,
}

impl FakeCall<'_> {
    /// Assertion lines of the test file, trimmed.
    pub fn assertions(&self) -> Vec<&str> {
        self.test_source
            .lines()
            .map(str::trim)
            .filter(|l| l.starts_with("assert"))
            .collect()
    }
}

type TestFn = dyn Fn(&FakeCall) -> ExecutionOutcome + Send + Sync;
type CaptureFn = dyn Fn(&str, &str) -> Result<(Option<String>, Vec<u8>), String> + Send + Sync;
type CoverageFn = dyn Fn(&FakeCall) -> CoverageReport + Send + Sync;

/// In-process runner driven by closures. Nothing is executed.
pub struct FakeRunner {
    test: Box<TestFn>,
    capture: Box<CaptureFn>,
    coverage: Box<CoverageFn>,
}

impl Default for FakeRunner {
    /// Every test passes, captures fail, coverage is empty.
    fn default() -> Self {
        Self::new(|_| ExecutionOutcome::pass())
    }
}

impl FakeRunner {
    pub fn new(test: impl Fn(&FakeCall) -> ExecutionOutcome + Send + Sync + 'static) -> Self {
        Self {
            test: Box::new(test),
            capture: Box::new(|_, _| Err("NotImplementedError".into())),
            coverage: Box::new(|_| CoverageReport::default()),
        }
    }

    /// `capture(module_source, call)` returns the literal and blob bytes,
    /// or the name of the exception the call raised.
    pub fn with_capture(
        mut self,
        capture: impl Fn(&str, &str) -> Result<(Option<String>, Vec<u8>), String>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        self.capture = Box::new(capture);
        self
    }

    pub fn with_coverage(
        mut self,
        coverage: impl Fn(&FakeCall) -> CoverageReport + Send + Sync + 'static,
    ) -> Self {
        self.coverage = Box::new(coverage);
        self
    }
}

fn read(path: &std::path::Path) -> Result<String, ExecError> {
    fs::read_to_string(path).map_err(|e| ExecError::io(format!("reading {}", path.display()), e))
}

impl Runner for FakeRunner {
    fn run_tests(&self, job: &TestJob) -> Result<TestRun, ExecError> {
        let module_source = read(&job.workdir.join(&job.module))?;
        let test_source = read(&job.workdir.join(&job.test_file))?;
        let call = |run| FakeCall {
            module_source: &module_source,
            test_source: &test_source,
            run,
        };
        let outcomes = (0..job.repeat).map(|i| (self.test)(&call(i))).collect();
        let coverage = job.coverage_out.as_ref().map(|_| {
            let mut report = (self.coverage)(&call(job.repeat.saturating_sub(1)));
            report.file = job.module.to_string_lossy().into_owned();
            report
        });
        Ok(TestRun { outcomes, coverage })
    }

    fn capture_call(&self, job: &CaptureJob) -> Result<Capture, ExecError> {
        let module_source = read(&job.workdir.join(&job.module))?;
        match (self.capture)(&module_source, &job.call) {
            Ok((literal, blob)) => {
                let path = job.workdir.join(&job.blob_out);
                fs::write(&path, blob).map_err(|e| ExecError::io("writing blob", e))?;
                Ok(Capture {
                    outcome: ExecutionOutcome::pass(),
                    literal,
                    value_blob: Some(job.blob_out.clone()),
                })
            }
            Err(exception) => Ok(Capture {
                outcome: ExecutionOutcome {
                    status: ExecStatus::OtherError,
                    exception_type: Some(exception),
                    ..ExecutionOutcome::pass()
                },
                literal: None,
                value_blob: None,
            }),
        }
    }
}
