#pragma once

#include <stdexcept>
#include <string>

namespace jetfit {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& msg) : Error(msg) {}
};

// Neighborhood cannot support a fit (coincident or collinear points).
class DegeneratePatch : public Error {
 public:
  explicit DegeneratePatch(const std::string& msg) : Error(msg) {}
};

// Normal matrix could not be factorized even after ridge escalation.
class SingularFit : public Error {
 public:
  SingularFit(const std::string& msg, double condition_estimate)
      : Error(msg), condition_estimate(condition_estimate) {}
  double condition_estimate;
};

class UnsupportedOrder : public Error {
 public:
  explicit UnsupportedOrder(const std::string& msg) : Error(msg) {}
};

// Non-finite value produced inside a computation; message names the stage.
class NumericalFault : public Error {
 public:
  explicit NumericalFault(const std::string& msg) : Error(msg) {}
};

// Structural problem with an on-disk dataset (e.g. sibling row counts disagree).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Unparseable token in an input file; message carries file and line number.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Bad command line or config combination; maps to a nonzero CLI exit.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& msg) : Error(msg) {}
};

}  // namespace jetfit
