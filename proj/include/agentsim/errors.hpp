#pragma once

#include <stdexcept>
#include <string>

namespace agentsim {

/// Base class for all workbench errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or truncated coupling message.
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// Malformed map, scenario or catalog file (carries file/field context).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// No path between the requested endpoints in the lane graph.
class NoRouteError : public Error {
 public:
  using Error::Error;
};

/// Position does not project onto any lane within the search radius.
class OffRoadError : public Error {
 public:
  using Error::Error;
};

/// Component host misuse: lifecycle, unknown parameter/port, stale handle.
class HostError : public Error {
 public:
  using Error::Error;
};

}  // namespace agentsim
