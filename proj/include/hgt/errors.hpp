#pragma once

#include <stdexcept>
#include <string>

namespace hgt {

// Base for all library errors.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A structural hypothesis on the kernel or growth profile does not hold
// (failed oddness/slope/inflection checks, missing root bracket, ...).
struct hypothesis_error : error {
    using error::error;
};

// Config file could not be parsed or validated. line == 0 means the error
// is not tied to a specific line.
struct config_error : error {
    int line;
    explicit config_error(const std::string& msg, int line_number = 0)
        : error(msg), line(line_number) {}
};

// An explicit step would violate the CFL bound; carries a usable step size.
struct step_rejected : error {
    double suggested_dt;
    explicit step_rejected(double dt)
        : error("time step rejected by CFL bound"), suggested_dt(dt) {}
};

// Curvature at the peak became too flat for the trait ODE (monomorphism
// horizon reached).
struct concavity_loss : error {
    using error::error;
};

// The argmax landed on a boundary cell: the domain is too small for the run.
struct boundary_argmax : error {
    using error::error;
};

// NaN/Inf detected in solver state.
struct numerical_abort : error {
    using error::error;
};

// Initial concentration trait lies outside the viability set D_R.
struct maladapted_initial_datum : error {
    using error::error;
};

} // namespace hgt
