#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ruleflow {

/**
 * Base class for every error raised by the library.
 *
 * `kind()` is a stable, machine-readable class name (the CLI prints it and
 * maps it to an exit code); `what()` carries the human-readable detail.
 */
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& detail)
        : std::runtime_error(detail), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

// ── notation errors ────────────────────────────────────────────────────────

/// Malformed rule text. Carries the 1-based source position of the problem.
class SyntaxError : public Error {
public:
    SyntaxError(int line, int column, const std::string& expected)
        : Error("SyntaxError", "line " + std::to_string(line) + ", column " +
                                   std::to_string(column) + ": " + expected),
          line_(line),
          column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

/// A statement with a fixed field count (edit/delete) had the wrong arity.
class ArityError : public Error {
public:
    ArityError(int line, const std::string& keyword, std::size_t expected, std::size_t got)
        : Error("ArityError", "line " + std::to_string(line) + ": " + keyword + " takes " +
                                  std::to_string(expected) + " fields, got " +
                                  std::to_string(got)) {}
};

/// A comparison referenced a context slot outside the known set.
class UnknownSlot : public Error {
public:
    explicit UnknownSlot(const std::string& name)
        : Error("UnknownSlot", "unknown condition slot '" + name + "'") {}
};

// ── rule-model errors ───────────────────────────────────────────────────────

/// An obligation referenced an attribute name never declared in its rule set.
class UnresolvedReference : public Error {
public:
    explicit UnresolvedReference(const std::string& name)
        : Error("UnresolvedReference", "obligation references undeclared attribute '" + name + "'") {}
};

/// A rule violated a structural invariant (empty field, stored wildcard, bad index).
class InvalidRule : public Error {
public:
    explicit InvalidRule(const std::string& detail) : Error("InvalidRule", detail) {}
};

// ── graph errors ────────────────────────────────────────────────────────────

class CycleDetected : public Error {
public:
    explicit CycleDetected(const std::string& path)
        : Error("CycleDetected", "dataflow graph contains a cycle: " + path) {}
};

class DanglingPort : public Error {
public:
    explicit DanglingPort(const std::string& ref)
        : Error("DanglingPort", "reference to unknown port " + ref) {}
};

class DuplicateId : public Error {
public:
    explicit DuplicateId(const std::string& id)
        : Error("DuplicateId", "duplicate identifier '" + id + "'") {}
};

/// An input port already has a producer or an injected port name collides.
class DuplicatePort : public Error {
public:
    explicit DuplicatePort(const std::string& ref)
        : Error("DuplicatePort", "port already exists or is already fed: " + ref) {}
};

/// An operation named a process/port pair the graph does not declare.
class UnknownPort : public Error {
public:
    explicit UnknownPort(const std::string& ref)
        : Error("UnknownPort", "unknown port " + ref) {}
};

// ── persistence errors ──────────────────────────────────────────────────────

/// File could not be read, written, locked, or parsed as a document.
class IoError : public Error {
public:
    explicit IoError(const std::string& detail) : Error("IoError", detail) {}
};

}  // namespace ruleflow
