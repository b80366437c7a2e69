#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adaptq {

// Root of every domain error raised by the library. The CLI maps these to
// exit code 1 and the service maps them to 4xx/5xx statuses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FileNotFound : public Error {
 public:
  explicit FileNotFound(const std::string& path)
      : Error("file not found: " + path), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error("parse error at line " + std::to_string(line) + ": " + reason),
        line_(line),
        reason_(reason) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error("validation error: " + what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io error: " + what) {}
};

class MalformedBlock : public Error {
 public:
  MalformedBlock(std::size_t index, const std::string& reason)
      : Error("malformed block " + std::to_string(index) + ": " + reason),
        index_(index),
        reason_(reason) {}
  std::size_t index() const noexcept { return index_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t index_;
  std::string reason_;
};

class InvalidDifficulty : public Error {
 public:
  explicit InvalidDifficulty(int value)
      : Error("difficulty must be in 1..5, got " + std::to_string(value)), value_(value) {}
  int value() const noexcept { return value_; }

 private:
  int value_;
};

class MissingExplanation : public Error {
 public:
  explicit MissingExplanation(const std::string& question_id)
      : Error("teaching example " + question_id + " has no explanation") {}
};

class UnparseableAnswer : public Error {
 public:
  explicit UnparseableAnswer(const std::string& reason)
      : Error("unparseable answer: " + reason), reason_(reason) {}
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class AuthError : public Error {
 public:
  using Error::Error;
};

class ScriptExhausted : public Error {
 public:
  explicit ScriptExhausted(std::size_t request_index)
      : Error("mock script exhausted at request " + std::to_string(request_index)) {}
};

class MasteredChapter : public Error {
 public:
  using Error::Error;
};

class GenerationFailed : public Error {
 public:
  GenerationFailed(int level, std::size_t slot, const std::string& reason)
      : Error("generation failed at level " + std::to_string(level) + ", slot " +
              std::to_string(slot) + ": " + reason),
        level_(level),
        slot_(slot) {}
  int level() const noexcept { return level_; }
  std::size_t slot() const noexcept { return slot_; }

 private:
  int level_;
  std::size_t slot_;
};

class IncompleteCells : public Error {
 public:
  using Error::Error;
};

class IncompleteCell : public Error {
 public:
  IncompleteCell(const std::string& model, const std::string& course, std::size_t count)
      : Error("cell (" + model + ", " + course + ") has " + std::to_string(count) +
              " records"),
        count_(count) {}
  std::size_t count() const noexcept { return count_; }

 private:
  std::size_t count_;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

class StaleQuestion : public Error {
 public:
  using Error::Error;
};

}  // namespace adaptq
