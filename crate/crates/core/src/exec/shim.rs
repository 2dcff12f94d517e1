use std::ffi::OsString;
use std::io::Read;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::{
    Capture, CaptureJob, CoverageReport, ExecError, ExecutionOutcome, Runner, TestJob, TestRun,
};

/// Extra wall time granted to the helper process on top of its own
/// per-run limits before it is killed.
const GRACE: Duration = Duration::from_secs(30);

/// Runs the interpreter-side helper as a subprocess:
///
/// ```text
/// <cmd> run-test --module <path> --test-file <path> --repeat <n> --timeout <s> [--coverage-out <json>]
/// <cmd> capture-call --module <path> --call <expr> --blob-out <path> --timeout <s>
/// ```
///
/// `run-test` prints a JSON array of outcomes, one per repetition.
/// `capture-call` prints one outcome object extended with `literal` and
/// `value_blob`. Both run with the working directory set to the job's
/// run directory, which is also put on `PYTHONPATH`.
#[derive(Debug, Clone)]
pub struct ShimRunner {
    program: OsString,
    args: Vec<OsString>,
}

struct Finished {
    stdout: String,
    stderr: String,
    success: bool,
    timed_out: bool,
}

impl ShimRunner {
    pub fn new<I, S>(program: impl Into<OsString>, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<OsString>,
    {
        Self {
            program: program.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    /// `python <script>`.
    pub fn python_script(python: &Path, script: &Path) -> Self {
        Self::new(python, [script])
    }

    fn invoke(
        &self,
        workdir: &Path,
        args: Vec<OsString>,
        deadline: Duration,
    ) -> Result<Finished, ExecError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .args(args)
            .current_dir(workdir)
            .env("PYTHONPATH", workdir)
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .env("PYTHONHASHSEED", "0")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| {
                ExecError::Runner(format!("starting {}: {e}", self.program.to_string_lossy()))
            })?;
        let stdout = drain(child.stdout.take());
        let stderr = drain(child.stderr.take());
        let (success, timed_out) = wait(&mut child, deadline)?;
        Ok(Finished {
            stdout: stdout.join().unwrap_or_default(),
            stderr: stderr.join().unwrap_or_default(),
            success,
            timed_out,
        })
    }
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

fn wait(child: &mut Child, deadline: Duration) -> Result<(bool, bool), ExecError> {
    let start = Instant::now();
    loop {
        if let Some(status) = child
            .try_wait()
            .map_err(|e| ExecError::io("waiting for runner", e))?
        {
            return Ok((status.success(), false));
        }
        if start.elapsed() > deadline {
            let _ = child.kill();
            let _ = child.wait();
            return Ok((false, true));
        }
        thread::sleep(Duration::from_millis(5));
    }
}

fn secs(d: Duration) -> OsString {
    format!("{}", d.as_secs_f64()).into()
}

fn protocol(what: &str, out: &Finished, err: serde_json::Error) -> ExecError {
    let detail = if out.success {
        format!("{what}: {err}")
    } else {
        format!("{what}: runner exited with failure: {}", out.stderr.trim())
    };
    ExecError::Protocol(detail)
}

impl Runner for ShimRunner {
    fn run_tests(&self, job: &TestJob) -> Result<TestRun, ExecError> {
        let mut args: Vec<OsString> = vec![
            "run-test".into(),
            "--module".into(),
            job.module.clone().into(),
            "--test-file".into(),
            job.test_file.clone().into(),
            "--repeat".into(),
            job.repeat.to_string().into(),
            "--timeout".into(),
            secs(job.timeout),
        ];
        if let Some(cov) = &job.coverage_out {
            args.push("--coverage-out".into());
            args.push(cov.clone().into());
        }
        let deadline = job.timeout * job.repeat.max(1) + GRACE;
        let out = self.invoke(&job.workdir, args, deadline)?;
        if out.timed_out {
            log::warn!("runner exceeded {deadline:?}, counting every repetition as a timeout");
            return Ok(TestRun {
                outcomes: vec![ExecutionOutcome::timeout(); job.repeat as usize],
                coverage: None,
            });
        }
        let outcomes: Vec<ExecutionOutcome> = serde_json::from_str(out.stdout.trim())
            .map_err(|e| protocol("outcome JSON", &out, e))?;
        let coverage = match &job.coverage_out {
            Some(path) => {
                let path = job.workdir.join(path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ExecError::io(format!("reading {}", path.display()), e))?;
                let report: CoverageReport = serde_json::from_str(&text)
                    .map_err(|e| ExecError::Protocol(format!("coverage JSON: {e}")))?;
                Some(report)
            }
            None => None,
        };
        Ok(TestRun { outcomes, coverage })
    }

    fn capture_call(&self, job: &CaptureJob) -> Result<Capture, ExecError> {
        let args: Vec<OsString> = vec![
            "capture-call".into(),
            "--module".into(),
            job.module.clone().into(),
            "--call".into(),
            job.call.clone().into(),
            "--blob-out".into(),
            job.blob_out.clone().into(),
            "--timeout".into(),
            secs(job.timeout),
        ];
        let out = self.invoke(&job.workdir, args, job.timeout + GRACE)?;
        if out.timed_out {
            return Ok(Capture {
                outcome: ExecutionOutcome::timeout(),
                literal: None,
                value_blob: None,
            });
        }
        serde_json::from_str(out.stdout.trim()).map_err(|e| protocol("capture JSON", &out, e))
    }
}
