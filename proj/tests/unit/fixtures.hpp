#pragma once

#include "lobexec/lob/order_book.hpp"

namespace lobexec::test {

/// Background book with bid volumes (3,4,6,5) from 100 down and ask volumes
/// (2,4,5,7) from 101 up.
inline OrderBook reference_book() {
  OrderBook book;
  const Lots bids[] = {3, 4, 6, 5};
  const Lots asks[] = {2, 4, 5, 7};
  for (int k = 0; k < 4; ++k) {
    book.submit_limit(Side::Buy, 100 - k, bids[k], Owner::Background);
    book.submit_limit(Side::Sell, 101 + k, asks[k], Owner::Background);
  }
  return book;
}

/// Reference book with agent lots behind 3 of the 4 background lots at 102
/// and behind all 5 at 103.
inline OrderBook reference_book_with_agent() {
  OrderBook book;
  const Lots bids[] = {3, 4, 6, 5};
  for (int k = 0; k < 4; ++k) book.submit_limit(Side::Buy, 100 - k, bids[k], Owner::Background);
  book.submit_limit(Side::Sell, 101, 2, Owner::Background);
  book.submit_limit(Side::Sell, 102, 3, Owner::Background);
  book.submit_limit(Side::Sell, 102, 1, Owner::Agent);
  book.submit_limit(Side::Sell, 102, 1, Owner::Background);
  book.submit_limit(Side::Sell, 103, 5, Owner::Background);
  book.submit_limit(Side::Sell, 103, 1, Owner::Agent);
  book.submit_limit(Side::Sell, 104, 7, Owner::Background);
  return book;
}

} // namespace lobexec::test
