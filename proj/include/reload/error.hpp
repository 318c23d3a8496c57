#pragma once

#include <stdexcept>
#include <string>

namespace reload {

//! Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

//! Malformed input document (catalog, workload, run configuration, checkpoint).
class ParseError : public Error {
public:
	using Error::Error;
};

//! A value violates a documented invariant or an operation precondition.
class InvariantError : public Error {
public:
	using Error::Error;
};

} // namespace reload
