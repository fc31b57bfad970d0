//! C interface: filled in below.
