//! Keeps the book's code snippets compiling; see `book/`.
