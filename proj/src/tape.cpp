#include "litefs/tape.hpp"

namespace litefs {

namespace {
thread_local Tape* current_tape = nullptr;
}

void Tape::record(const char* op, std::function<void()> backward, std::function<void()> reset) {
  records_.push_back(Record{op, std::move(backward), std::move(reset)});
}

TapeScope::TapeScope(Tape& tape) : previous_(current_tape) { current_tape = &tape; }
TapeScope::~TapeScope() { current_tape = previous_; }

NoTapeScope::NoTapeScope() : previous_(current_tape) { current_tape = nullptr; }
NoTapeScope::~NoTapeScope() { current_tape = previous_; }

Tape* active_tape() noexcept { return current_tape; }

}  // namespace litefs
