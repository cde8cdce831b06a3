//! Command implementations behind the `annulus` binary.

pub mod commands;
pub mod output;
pub mod scan;
pub mod svg;

/// Process exit code for an error: 2 for rejected inputs, 1 for anything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let refused = err
        .chain()
        .any(|e| e.downcast_ref::<annulus::Error>().is_some_and(annulus::Error::is_precondition));
    if refused {
        2
    } else {
        1
    }
}
