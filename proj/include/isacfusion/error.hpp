#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace isac {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on inputs or configuration does not hold.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A measurement stream is not sorted by timestamp.
class StreamOrderError : public ValidationError {
public:
    StreamOrderError(std::string stream, std::size_t index);

    const std::string& stream() const noexcept { return stream_; }
    std::size_t index() const noexcept { return index_; }

private:
    std::string stream_;
    std::size_t index_;
};

/// Training produced a non-finite loss.
class TrainingError : public Error {
public:
    TrainingError(const std::string& what, int epoch, int batch)
        : Error(what), epoch_(epoch), batch_(batch) {}

    int epoch() const noexcept { return epoch_; }
    int batch() const noexcept { return batch_; }

private:
    int epoch_;
    int batch_;
};

}  // namespace isac
