//! Stage orchestration shared by the CLI and the acceptance study.
